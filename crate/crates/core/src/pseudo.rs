//! Pseudo-outcome construction.
//!
//! Each transform maps a row `(x, a, y)` and the nuisance triple to a value
//! whose conditional mean given `X = x` is the CATE:
//!
//! * `PI`:  `mu1(x) - mu0(x)`
//! * `RA`:  `a (y - mu0(x)) + (1 - a)(mu1(x) - y)`
//! * `IPW`: `(a - p(x)) y / (p(x) (1 - p(x)))`
//! * `DR`:  `mu1(x) - mu0(x) + (a - p(x)) (y - mu_a(x)) / (p(x) (1 - p(x)))`
//!
//! [`conditional_mean_check`] verifies that property by Monte Carlo against
//! the ground-truth CATE of a synthetic DGP.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{sample_dgp, true_cate, Dataset, DgpSpec, Sample};
use crate::error::{Error, Result};
use crate::math::{mean, population_variance};
use crate::nuisance::{oracle_nuisance, NuisanceSet, Provenance};

/// The four second-stage regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PseudoOutcomeKind {
    Pi,
    Ra,
    Ipw,
    Dr,
}

impl PseudoOutcomeKind {
    pub const ALL: [PseudoOutcomeKind; 4] = [
        PseudoOutcomeKind::Pi,
        PseudoOutcomeKind::Ra,
        PseudoOutcomeKind::Ipw,
        PseudoOutcomeKind::Dr,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pi" => Ok(PseudoOutcomeKind::Pi),
            "ra" => Ok(PseudoOutcomeKind::Ra),
            "ipw" => Ok(PseudoOutcomeKind::Ipw),
            "dr" => Ok(PseudoOutcomeKind::Dr),
            other => Err(Error::InvalidSpec(format!("unknown pseudo-outcome kind: {other}"))),
        }
    }
}

impl fmt::Display for PseudoOutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PseudoOutcomeKind::Pi => "pi",
            PseudoOutcomeKind::Ra => "ra",
            PseudoOutcomeKind::Ipw => "ipw",
            PseudoOutcomeKind::Dr => "dr",
        };
        write!(f, "{s}")
    }
}

/// Covariates plus one pseudo-outcome per row; the stage-2 training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoDataset {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub kind: PseudoOutcomeKind,
    pub nuisance_provenance: Provenance,
}

impl PseudoDataset {
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    /// Audit export: covariate columns, `y_pseudo`, and the kind tag.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let dim = self.xs.first().map_or(0, |x| x.len());
        let mut header: Vec<String> = (0..dim).map(|i| format!("x_{i}")).collect();
        header.push("y_pseudo".into());
        header.push("kind".into());
        w.write_record(&header)?;
        for (x, y) in self.xs.iter().zip(self.ys.iter()) {
            let mut rec: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
            rec.push(format!("{y}"));
            rec.push(self.kind.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn combine(
    kind: PseudoOutcomeKind,
    a: u8,
    y: f64,
    mu1: f64,
    mu0: f64,
    p: f64,
) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidData(format!(
            "propensity {p} violates overlap; pseudo-outcomes undefined"
        )));
    }
    let af = f64::from(a);
    let value = match kind {
        PseudoOutcomeKind::Pi => mu1 - mu0,
        PseudoOutcomeKind::Ra => af * (y - mu0) + (1.0 - af) * (mu1 - y),
        PseudoOutcomeKind::Ipw => (af - p) * y / (p * (1.0 - p)),
        PseudoOutcomeKind::Dr => {
            let mu_a = if a == 1 { mu1 } else { mu0 };
            mu1 - mu0 + (af - p) * (y - mu_a) / (p * (1.0 - p))
        }
    };
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("{kind} pseudo-outcome is not finite")));
    }
    Ok(value)
}

/// Pseudo-outcome for a single sample.
pub fn pseudo_outcome(kind: PseudoOutcomeKind, nuis: &NuisanceSet, sample: &Sample) -> Result<f64> {
    let mu1 = nuis.mu1.eval_one(&sample.x)?;
    let mu0 = nuis.mu0.eval_one(&sample.x)?;
    let p = nuis.prop.eval_one(&sample.x)?;
    if !(mu1.is_finite() && mu0.is_finite() && p.is_finite()) {
        return Err(Error::NonFinite("nuisance evaluation is not finite".into()));
    }
    combine(kind, sample.a, sample.y, mu1, mu0, p)
}

/// Row-wise pseudo-outcomes for a whole dataset; order preserved.
pub fn build_pseudo_dataset(
    kind: PseudoOutcomeKind,
    nuis: &NuisanceSet,
    data: &Dataset,
) -> Result<PseudoDataset> {
    let xs = data.xs();
    let mu1s = nuis.mu1.eval_batch(&xs)?;
    let mu0s = nuis.mu0.eval_batch(&xs)?;
    let ps = nuis.prop.eval_batch(&xs)?;
    let mut ys = Vec::with_capacity(data.len());
    for (i, s) in data.samples.iter().enumerate() {
        if !(mu1s[i].is_finite() && mu0s[i].is_finite() && ps[i].is_finite()) {
            return Err(Error::NonFinite(format!("nuisance evaluation at row {i} is not finite")));
        }
        ys.push(combine(kind, s.a, s.y, mu1s[i], mu0s[i], ps[i])?);
    }
    Ok(PseudoDataset {
        xs,
        ys,
        kind,
        nuisance_provenance: nuis.provenance,
    })
}

/// One bin of the conditional-mean diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct BinCheck {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub count: usize,
    pub mean_pseudo: f64,
    pub tau_center: f64,
    /// Standard error of `mean_pseudo - tau_center`: Monte Carlo error of
    /// the binned mean plus the within-bin variation of the reference CATE
    /// (the bin center only represents the bin up to that variation).
    pub std_err: f64,
    pub z: f64,
    /// Bins with fewer than [`MIN_BIN_COUNT`] samples are flagged, not scored.
    pub scored: bool,
}

/// Minimum occupancy for a bin to be scored.
pub const MIN_BIN_COUNT: usize = 30;

/// Report of [`conditional_mean_check`].
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalMeanReport {
    pub kind: PseudoOutcomeKind,
    pub n: usize,
    pub bins: Vec<BinCheck>,
}

impl ConditionalMeanReport {
    /// Largest |z| over scored bins; 0 if nothing was scored.
    pub fn max_abs_z(&self) -> f64 {
        self.bins
            .iter()
            .filter(|b| b.scored)
            .fold(0.0f64, |m, b| m.max(b.z.abs()))
    }

    pub fn scored_bins(&self) -> usize {
        self.bins.iter().filter(|b| b.scored).count()
    }
}

/// Monte Carlo check that the pseudo-outcome's conditional mean matches the
/// ground-truth CATE: draws `n` rows from the DGP, forms pseudo-outcomes with
/// oracle nuisances, bins the covariate support, and z-scores the binned
/// means against the bin-center CATE.
pub fn conditional_mean_check(
    kind: PseudoOutcomeKind,
    spec: &DgpSpec,
    n: usize,
    n_bins: usize,
    seed: u64,
) -> Result<ConditionalMeanReport> {
    if n == 0 {
        return Err(Error::InvalidData("conditional mean check needs n > 0".into()));
    }
    if n_bins == 0 {
        return Err(Error::InvalidSpec("need at least one bin".into()));
    }
    let data = sample_dgp(spec, n, seed)?;
    let nuis = oracle_nuisance(spec);
    let pseudo = build_pseudo_dataset(kind, &nuis, &data)?;

    let (lo, hi) = spec.support;
    let width = (hi - lo) / n_bins as f64;
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    let mut taus: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for (x, y) in pseudo.xs.iter().zip(pseudo.ys.iter()) {
        let b = (((x[0] - lo) / width).floor() as usize).min(n_bins - 1);
        values[b].push(*y);
        taus[b].push(true_cate(spec, x[0]));
    }

    let mut bins = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let blo = lo + b as f64 * width;
        let bhi = blo + width;
        let center = 0.5 * (blo + bhi);
        let count = values[b].len();
        let tau_center = true_cate(spec, center);
        let (mean_pseudo, std_err, z) = if count == 0 {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let m = mean(&values[b]);
            let var_mean = population_variance(&values[b]) / count as f64;
            let var_tau = population_variance(&taus[b]);
            let se = (var_mean + var_tau).sqrt();
            let num = m - tau_center;
            let z = if se > 0.0 {
                num / se
            } else if num == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            (m, se, z)
        };
        bins.push(BinCheck {
            lo: blo,
            hi: bhi,
            center,
            count,
            mean_pseudo,
            tau_center,
            std_err,
            z,
            scored: count >= MIN_BIN_COUNT,
        });
    }
    Ok(ConditionalMeanReport { kind, n, bins })
}
