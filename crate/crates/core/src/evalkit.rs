//! Decision-quality and accuracy metrics.
//!
//! For synthetic data the reference CATE is the ground truth; for real data
//! it is the doubly robust pseudo-outcome computed on the evaluation split.
//! PEHE is reported as the mean squared difference (not its square root,
//! which [`root_pehe`] exposes separately); policy loss is the negative
//! thresholded payoff `-mean(1(g > 0) * tau_ref)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::math::{mean, sample_std};
use crate::nuisance::NuisanceSet;
use crate::pseudo::PseudoOutcomeKind;

/// Metrics of one trained model on one evaluation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub gamma: f64,
    pub seed: u64,
    pub kind: PseudoOutcomeKind,
    pub pehe: f64,
    pub policy_loss: f64,
    pub policy_value: f64,
    pub n_eval: usize,
}

fn check_rows(n_pred: usize, n_ref: usize) -> Result<()> {
    if n_pred != n_ref {
        return Err(Error::ShapeMismatch(format!(
            "{n_pred} predictions vs {n_ref} reference values"
        )));
    }
    if n_pred == 0 {
        return Err(Error::InvalidData("empty evaluation set".into()));
    }
    Ok(())
}

/// Mean squared difference between predictions and the reference CATE.
pub fn pehe_values(pred: &[f64], tau_ref: &[f64]) -> Result<f64> {
    check_rows(pred.len(), tau_ref.len())?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(tau_ref.iter())
        .map(|(g, t)| (g - t) * (g - t))
        .sum::<f64>()
        / n)
}

/// PEHE of an evaluable CATE function on covariate rows.
pub fn pehe<F: Fn(&[f64]) -> f64>(g: F, tau_ref: &[f64], xs: &[Vec<f64>]) -> Result<f64> {
    check_rows(xs.len(), tau_ref.len())?;
    let pred: Vec<f64> = xs.iter().map(|x| g(x)).collect();
    pehe_values(&pred, tau_ref)
}

/// Square root of PEHE, for comparability with sources that report it.
pub fn root_pehe(pred: &[f64], tau_ref: &[f64]) -> Result<f64> {
    Ok(pehe_values(pred, tau_ref)?.sqrt())
}

/// Negative thresholded payoff: `-mean(1(g > 0) * tau_ref)`.
pub fn policy_loss_values(pred: &[f64], tau_ref: &[f64]) -> Result<f64> {
    check_rows(pred.len(), tau_ref.len())?;
    let n = pred.len() as f64;
    Ok(-pred
        .iter()
        .zip(tau_ref.iter())
        .map(|(g, t)| if *g > 0.0 { *t } else { 0.0 })
        .sum::<f64>()
        / n)
}

/// Policy loss of an evaluable CATE function on covariate rows.
pub fn policy_loss<F: Fn(&[f64]) -> f64>(g: F, tau_ref: &[f64], xs: &[Vec<f64>]) -> Result<f64> {
    check_rows(xs.len(), tau_ref.len())?;
    let pred: Vec<f64> = xs.iter().map(|x| g(x)).collect();
    policy_loss_values(&pred, tau_ref)
}

/// Doubly robust estimate of the absolute policy value
/// `E[pi(x) Y(1) + (1 - pi(x)) Y(0)]` using arm-wise AIPW scores
/// `psi_a = mu_a(x) + 1(A = a)(y - mu_a(x)) / P(A = a | x)`.
///
/// The difference `psi_1 - psi_0` is exactly the DR pseudo-outcome, so
/// rankings agree with the pseudo-outcome-based policy loss while the level
/// is an absolute value estimate.
pub fn dr_policy_value<P: Fn(&[f64]) -> f64>(
    policy: P,
    nuis: &NuisanceSet,
    data: &Dataset,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidData("empty evaluation dataset".into()));
    }
    let probs: Vec<f64> = data.samples.iter().map(|s| policy(&s.x)).collect();
    dr_policy_value_values(&probs, nuis, data)
}

/// [`dr_policy_value`] with the per-row treatment probabilities already
/// evaluated (one entry per dataset row, in order).
pub fn dr_policy_value_values(
    policy_probs: &[f64],
    nuis: &NuisanceSet,
    data: &Dataset,
) -> Result<f64> {
    check_rows(policy_probs.len(), data.len())?;
    let xs = data.xs();
    let mu1s = nuis.mu1.eval_batch(&xs)?;
    let mu0s = nuis.mu0.eval_batch(&xs)?;
    let ps = nuis.prop.eval_batch(&xs)?;
    let mut acc = 0.0;
    for (i, s) in data.samples.iter().enumerate() {
        let p = ps[i];
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidData(format!(
                "propensity {p} at row {i} violates overlap"
            )));
        }
        let pi = policy_probs[i];
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::InvalidData(format!(
                "policy value {pi} at row {i} outside [0, 1]"
            )));
        }
        let a = f64::from(s.a);
        let psi1 = mu1s[i] + a * (s.y - mu1s[i]) / p;
        let psi0 = mu0s[i] + (1.0 - a) * (s.y - mu0s[i]) / (1.0 - p);
        acc += pi * psi1 + (1.0 - pi) * psi0;
    }
    let value = acc / data.len() as f64;
    if !value.is_finite() {
        return Err(Error::NonFinite("policy value estimate is not finite".into()));
    }
    Ok(value)
}

/// One row of the improvement-over-observational-policy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub label: String,
    pub mean: f64,
    /// Sample standard deviation over seeds; 0 for a single seed.
    pub std: f64,
    /// Absent for the observational-policy row.
    pub improvement_abs: Option<f64>,
    /// Percentage improvement relative to the observational value; absent
    /// for the observational row (and when that value is zero).
    pub improvement_pct: Option<f64>,
}

/// Builds the improvement table: the observational row first, then one row
/// per labelled set of per-seed policy values. Improvements are computed on
/// unrounded values.
pub fn improvement_table(
    rows: &[(String, Vec<f64>)],
    obs_value: f64,
) -> Result<Vec<ImprovementRow>> {
    if rows.is_empty() {
        return Err(Error::InvalidData("improvement table needs at least one row".into()));
    }
    let mut out = Vec::with_capacity(rows.len() + 1);
    out.push(ImprovementRow {
        label: "Obs. policy".into(),
        mean: obs_value,
        std: 0.0,
        improvement_abs: None,
        improvement_pct: None,
    });
    for (label, values) in rows {
        if values.is_empty() {
            return Err(Error::InvalidData(format!("row '{label}' has no values")));
        }
        let m = mean(values);
        let s = sample_std(values);
        let abs = m - obs_value;
        let pct = if obs_value != 0.0 {
            Some(100.0 * abs / obs_value)
        } else {
            None
        };
        out.push(ImprovementRow {
            label: label.clone(),
            mean: m,
            std: s,
            improvement_abs: Some(abs),
            improvement_pct: pct,
        });
    }
    Ok(out)
}

/// Writes metric reports with the stable column order
/// `gamma, seed, kind, pehe, policy_loss, policy_value`.
pub fn write_metrics_csv(reports: &[MetricReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["gamma", "seed", "kind", "pehe", "policy_loss", "policy_value"])?;
    for r in reports {
        w.write_record(&[
            format!("{}", r.gamma),
            format!("{}", r.seed),
            r.kind.to_string(),
            format!("{}", r.pehe),
            format!("{}", r.policy_loss),
            format!("{}", r.policy_value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_improvement_csv(rows: &[ImprovementRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label", "policy_value_mean", "policy_value_std", "improvement_abs", "improvement_pct"])?;
    for r in rows {
        w.write_record(&[
            r.label.clone(),
            format!("{}", r.mean),
            format!("{}", r.std),
            r.improvement_abs.map_or(String::new(), |v| format!("{v}")),
            r.improvement_pct.map_or(String::new(), |v| format!("{v}")),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Zero crossings of a sampled curve by linear interpolation; exact zeros
/// count as crossings at the grid point.
pub fn sign_changes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..ys.len().saturating_sub(1) {
        let (y0, y1) = (ys[i], ys[i + 1]);
        if y0 == 0.0 {
            out.push(xs[i]);
        } else if y0 * y1 < 0.0 {
            let t = y0 / (y0 - y1);
            out.push(xs[i] + t * (xs[i + 1] - xs[i]));
        }
    }
    if let Some(&last) = ys.last() {
        if last == 0.0 {
            out.push(xs[ys.len() - 1]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{sample_dgp, true_cate, DgpName, DgpSpec};
    use crate::nuisance::oracle_nuisance;
    use proptest::prelude::*;

    #[test]
    fn pehe_hand_values() {
        let tau = vec![0.5, -0.2, 0.0];
        assert_eq!(pehe_values(&tau, &tau).unwrap(), 0.0);
        let shifted: Vec<f64> = tau.iter().map(|t| t + 0.1).collect();
        let v = pehe_values(&shifted, &tau).unwrap();
        assert!((v - 0.01).abs() < 1e-12);
        assert!((root_pehe(&shifted, &tau).unwrap() - 0.1).abs() < 1e-12);
        assert!(pehe_values(&[], &[]).is_err());
    }

    #[test]
    fn pehe_is_permutation_invariant() {
        let pred = vec![0.1, 0.7, -0.3, 0.9];
        let tau = vec![0.0, 0.5, -0.5, 1.0];
        let a = pehe_values(&pred, &tau).unwrap();
        let perm = [2usize, 0, 3, 1];
        let pred_p: Vec<f64> = perm.iter().map(|&i| pred[i]).collect();
        let tau_p: Vec<f64> = perm.iter().map(|&i| tau[i]).collect();
        assert!((a - pehe_values(&pred_p, &tau_p).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn policy_loss_hand_values() {
        let tau = vec![1.0; 4];
        assert_eq!(policy_loss_values(&[1.0; 4], &tau).unwrap(), -1.0);
        assert_eq!(policy_loss_values(&[-1.0; 4], &tau).unwrap(), 0.0);
        // threshold is strict: g = 0 means no treatment
        assert_eq!(policy_loss_values(&[0.0; 4], &tau).unwrap(), 0.0);
    }

    proptest! {
        /// policy loss depends on g only through its sign.
        #[test]
        fn policy_loss_scale_invariant(c in 1e-6f64..1e6) {
            let pred = [0.4, -0.2, 0.0, 3.0];
            let tau = [1.0, 2.0, -0.5, 0.25];
            let scaled: Vec<f64> = pred.iter().map(|g| c * g).collect();
            let a = policy_loss_values(&pred, &tau).unwrap();
            let b = policy_loss_values(&scaled, &tau).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn oracle_thresholding_is_optimal() {
        let spec = DgpSpec::preset(DgpName::Fig2Sigmoid);
        let data = sample_dgp(&spec, 4000, 17).unwrap();
        let xs = data.xs();
        let tau: Vec<f64> = xs.iter().map(|x| true_cate(&spec, x[0])).collect();
        let oracle_loss = policy_loss_values(&tau, &tau).unwrap();
        // a few arbitrary CATE surrogates, none may beat the oracle
        let candidates: Vec<Vec<f64>> = vec![
            xs.iter().map(|x| 2.0 * x[0] + 0.3).collect(),
            xs.iter().map(|x| -x[0]).collect(),
            xs.iter().map(|x| x[0] * x[0] - 0.05).collect(),
            vec![1.0; xs.len()],
        ];
        for pred in candidates {
            let loss = policy_loss_values(&pred, &tau).unwrap();
            assert!(
                oracle_loss <= loss + 1e-12,
                "oracle {oracle_loss} beaten by {loss}"
            );
        }
        // quadrature oracle: best achievable thresholded loss
        let m = 10_000;
        let quad: f64 = (0..m)
            .map(|i| {
                let x = -0.5 + (i as f64 + 0.5) / m as f64;
                true_cate(&spec, x).max(0.0)
            })
            .sum::<f64>()
            / m as f64;
        assert!((oracle_loss + quad).abs() < 0.02, "MC {oracle_loss} vs quadrature {}", -quad);
    }

    #[test]
    fn dr_value_of_behavioral_policy_on_noiseless_data() {
        let mut spec = DgpSpec::preset(DgpName::SettingB);
        spec.noise_sd = 0.0;
        let data = sample_dgp(&spec, 5000, 3).unwrap();
        let nuis = oracle_nuisance(&spec);
        let v = dr_policy_value(|x| spec.propensity.eval(x[0]), &nuis, &data).unwrap();
        // residual corrections vanish, leaving mean(pi_b mu1 + (1-pi_b) mu0)
        let expect = data
            .samples
            .iter()
            .map(|s| {
                let p = spec.propensity.eval(s.x[0]);
                p * crate::datagen::true_response(&spec, 1, s.x[0])
            })
            .sum::<f64>()
            / data.len() as f64;
        assert!((v - expect).abs() < 1e-6, "{v} vs {expect}");
    }

    #[test]
    fn dr_value_of_never_treat_on_fig2_is_zero() {
        let spec = DgpSpec::preset(DgpName::Fig2Sigmoid);
        let data = sample_dgp(&spec, 10_000, 5).unwrap();
        let nuis = oracle_nuisance(&spec);
        let v = dr_policy_value(|_| 0.0, &nuis, &data).unwrap();
        // mu0 is identically zero; only control-arm noise remains
        assert!(v.abs() < 1e-3, "{v}");
    }

    /// Monte Carlo unbiasedness of the DR policy value against quadrature.
    #[test]
    fn dr_value_is_unbiased_over_resamples() {
        let spec = DgpSpec::preset(DgpName::Fig2Sigmoid);
        let nuis = oracle_nuisance(&spec);
        let policy = |x: &[f64]| f64::from(u8::from(x[0] > 0.0));

        let m = 10_000;
        let analytic: f64 = (0..m)
            .map(|i| {
                let x = -0.5 + (i as f64 + 0.5) / m as f64;
                let pi = policy(&[x]);
                pi * crate::datagen::true_response(&spec, 1, x)
            })
            .sum::<f64>()
            / m as f64;

        let estimates: Vec<f64> = (0..200)
            .map(|r| {
                let data = sample_dgp(&spec, 10_000, 1000 + r).unwrap();
                dr_policy_value(policy, &nuis, &data).unwrap()
            })
            .collect();
        let m_hat = mean(&estimates);
        let se = sample_std(&estimates) / (estimates.len() as f64).sqrt();
        assert!(
            (m_hat - analytic).abs() < 3.0 * se,
            "mean {m_hat} vs analytic {analytic} (se {se})"
        );
    }

    #[test]
    fn improvement_table_arithmetic() {
        let rows = vec![
            ("gamma = 0".to_string(), vec![0.1738]),
            ("same as obs".to_string(), vec![0.1450, 0.1450]),
        ];
        let table = improvement_table(&rows, 0.1450).unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(table[0].label, "Obs. policy");
        assert!(table[0].improvement_abs.is_none());
        assert!(table[0].improvement_pct.is_none());

        let pct = table[1].improvement_pct.unwrap();
        assert!((pct - 19.862).abs() < 0.01, "pct {pct}");
        assert_eq!(table[1].std, 0.0); // single seed convention

        assert!((table[2].improvement_pct.unwrap()).abs() < 1e-9);
        assert!(improvement_table(&[], 0.1).is_err());
    }

    #[test]
    fn metrics_csv_column_order() {
        let reports = vec![MetricReport {
            gamma: 0.9,
            seed: 3,
            kind: PseudoOutcomeKind::Dr,
            pehe: 0.01,
            policy_loss: -0.6,
            policy_value: 0.6,
            n_eval: 10,
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        write_metrics_csv(&reports, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "gamma,seed,kind,pehe,policy_loss,policy_value"
        );
        assert_eq!(lines.next().unwrap(), "0.9,3,dr,0.01,-0.6,0.6");
    }

    #[test]
    fn sign_changes_interpolate() {
        let xs = vec![0.0, 1.0, 2.0, 3.0];
        let ys = vec![-1.0, 1.0, 0.5, -0.5];
        let roots = sign_changes(&xs, &ys);
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - 0.5).abs() < 1e-12);
        assert!((roots[1] - 2.5).abs() < 1e-12);
    }
}
