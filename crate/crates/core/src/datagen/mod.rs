//! Synthetic data-generating processes with closed-form ground truth,
//! dataset splitting, and CSV import/export.
//!
//! All DGPs share the template: covariates uniform on the support, binary
//! treatment `A ~ Bernoulli(pi_b(X))`, outcome `Y ~ Normal(mu_A(X), noise_sd)`.
//! The control response is identically zero in every DGP, so the CATE equals
//! the treated response.

mod hillstrom;

pub use hillstrom::{load_hillstrom, PreprocessOptions};

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::sigmoid;

/// Which response/propensity family a synthetic dataset uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpName {
    /// Three-piece response with breakpoints at +-0.25.
    Fig1Piecewise,
    /// Scaled-sigmoid response; the CATE changes sign once.
    Fig2Sigmoid,
    /// Same responses as `Fig2Sigmoid` at the larger benchmark sample sizes.
    SettingA,
    /// Same responses as `Fig1Piecewise` with a logistic propensity.
    SettingB,
}

impl DgpName {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig1_piecewise" | "fig1" => Ok(DgpName::Fig1Piecewise),
            "fig2_sigmoid" | "fig2" => Ok(DgpName::Fig2Sigmoid),
            "setting_a" | "settinga" | "a" => Ok(DgpName::SettingA),
            "setting_b" | "settingb" | "b" => Ok(DgpName::SettingB),
            other => Err(Error::InvalidSpec(format!("unknown DGP name: {other}"))),
        }
    }
}

impl fmt::Display for DgpName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DgpName::Fig1Piecewise => "fig1_piecewise",
            DgpName::Fig2Sigmoid => "fig2_sigmoid",
            DgpName::SettingA => "setting_a",
            DgpName::SettingB => "setting_b",
        };
        write!(f, "{s}")
    }
}

/// Treatment-assignment mechanism of a synthetic DGP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropensityKind {
    Constant(f64),
    /// `sigmoid(scale * x)` in the scalar covariate.
    Logistic { scale: f64 },
}

impl PropensityKind {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PropensityKind::Constant(p) => *p,
            PropensityKind::Logistic { scale } => sigmoid(scale * x),
        }
    }
}

/// Full specification of a synthetic data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub name: DgpName,
    /// Covariate support `[lo, hi]`.
    pub support: (f64, f64),
    /// Standard deviation of the Gaussian outcome noise.
    pub noise_sd: f64,
    pub propensity: PropensityKind,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

impl DgpSpec {
    /// Canonical configuration for each DGP: support `[-0.5, 0.5]`,
    /// noise 0.01, constant 0.5 propensity except `SettingB` which uses
    /// `sigmoid(0.1 x)`.
    pub fn preset(name: DgpName) -> Self {
        let propensity = match name {
            DgpName::SettingB => PropensityKind::Logistic { scale: 0.1 },
            _ => PropensityKind::Constant(0.5),
        };
        let (n_train, n_val, n_test) = match name {
            DgpName::Fig1Piecewise | DgpName::Fig2Sigmoid => (1000, 500, 3000),
            DgpName::SettingA | DgpName::SettingB => (2200, 500, 3000),
        };
        DgpSpec {
            name,
            support: (-0.5, 0.5),
            noise_sd: 0.01,
            propensity,
            n_train,
            n_val,
            n_test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.support.0 < self.support.1) {
            return Err(Error::InvalidSpec("covariate support must be a non-empty interval".into()));
        }
        if self.noise_sd < 0.0 || !self.noise_sd.is_finite() {
            return Err(Error::InvalidSpec("noise_sd must be a finite non-negative real".into()));
        }
        if let PropensityKind::Constant(p) = self.propensity {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "constant propensity must lie in (0,1), got {p}"
                )));
            }
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidSpec("n_train and n_test must be positive".into()));
        }
        Ok(())
    }
}

fn response_sigmoid(a: u8, x: f64) -> f64 {
    f64::from(a) * (2.0 * sigmoid(10.0 * x) - 0.5)
}

fn response_piecewise(a: u8, x: f64) -> f64 {
    // Indicator conditions are strict, exactly as the piecewise definition
    // reads; both breakpoints are measure-zero under the uniform design.
    let shape = if x < -0.25 {
        0.6 * (8.0 * (x + 0.25)).sin() + 0.3
    } else if x > -0.25 && x < 0.25 {
        2.0 * sigmoid(10.0 * (x + 2.0)) - 0.5
    } else if x > 0.25 {
        0.5 * (10.0 * (x - 0.25) + 1.5).sin()
    } else {
        0.0
    };
    f64::from(a) * shape
}

/// Exact response function `mu_a(x)` of the named DGP.
pub fn true_response(spec: &DgpSpec, a: u8, x: f64) -> f64 {
    match spec.name {
        DgpName::Fig2Sigmoid | DgpName::SettingA => response_sigmoid(a, x),
        DgpName::Fig1Piecewise | DgpName::SettingB => response_piecewise(a, x),
    }
}

/// Ground-truth CATE `mu_1(x) - mu_0(x)`.
pub fn true_cate(spec: &DgpSpec, x: f64) -> f64 {
    true_response(spec, 1, x) - true_response(spec, 0, x)
}

/// One observation: covariates, binary treatment, outcome, and (for
/// synthetic data) the ground truth behind the draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub a: u8,
    pub y: f64,
    pub true_cate: Option<f64>,
    pub true_propensity: Option<f64>,
}

/// An immutable collection of samples with a common covariate dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let ds = Dataset { samples };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        for (i, s) in self.samples.iter().enumerate() {
            if s.x.len() != dim {
                return Err(Error::InvalidData(format!(
                    "sample {i} has {} covariates, expected {dim}",
                    s.x.len()
                )));
            }
            if s.a > 1 {
                return Err(Error::InvalidData(format!("sample {i}: treatment must be 0 or 1")));
            }
            if !s.y.is_finite() {
                return Err(Error::InvalidData(format!("sample {i}: outcome is not finite")));
            }
            if let Some(p) = s.true_propensity {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::InvalidData(format!(
                        "sample {i}: propensity {p} violates overlap"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Covariate dimension (0 for an empty dataset).
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.x.len())
    }

    pub fn xs(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.x.clone()).collect()
    }

    pub fn arms(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.a).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y).collect()
    }

    /// Ground-truth CATE column; `None` unless every row carries it.
    pub fn true_cates(&self) -> Option<Vec<f64>> {
        self.samples.iter().map(|s| s.true_cate).collect()
    }

    /// Rows with the given treatment arm.
    pub fn filter_arm(&self, arm: u8) -> Dataset {
        Dataset {
            samples: self
                .samples
                .iter()
                .filter(|s| s.a == arm)
                .cloned()
                .collect(),
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

/// Draws `n` i.i.d. rows from the DGP. Deterministic given `seed`.
pub fn sample_dgp(spec: &DgpSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidData("cannot sample an empty dataset".into()));
    }
    let (lo, hi) = spec.support;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.gen_range(lo..hi);
        let p = spec.propensity.eval(x);
        let a = u8::from(rng.gen::<f64>() < p);
        let noise: f64 = rng.sample(StandardNormal);
        let y = true_response(spec, a, x) + spec.noise_sd * noise;
        samples.push(Sample {
            x: vec![x],
            a,
            y,
            true_cate: Some(true_cate(spec, x)),
            true_propensity: Some(p),
        });
    }
    Ok(Dataset { samples })
}

/// Disjoint exhaustive train/validation/test fractions plus a shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let s = SplitSpec {
            train,
            val,
            test,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidSpec(format!("{name} fraction {f} outside [0, 1]")));
            }
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!("split fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Shuffled row assignment for `n` rows under `spec`; used by [`split`] and
/// by Hillstrom preprocessing so standardization sees the same train rows.
pub(crate) fn split_indices(n: usize, spec: &SplitSpec) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    idx.shuffle(&mut rng);
    let c1 = ((n as f64) * spec.train).round() as usize;
    let c2 = ((n as f64) * (spec.train + spec.val)).round() as usize;
    let c1 = c1.min(n);
    let c2 = c2.clamp(c1, n);
    (
        idx[..c1].to_vec(),
        idx[c1..c2].to_vec(),
        idx[c2..].to_vec(),
    )
}

/// Splits into disjoint exhaustive (train, val, test) parts, deterministic
/// per `spec.seed`.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidData("cannot split an empty dataset".into()));
    }
    let (tr, va, te) = split_indices(data.len(), spec);
    Ok((data.subset(&tr), data.subset(&va), data.subset(&te)))
}

/// Writes the dataset as CSV: `x_0..x_{d-1}, a, y` plus `tau` and `pi_b`
/// columns when every row carries them.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = data.dim();
    let with_tau = !data.is_empty() && data.samples.iter().all(|s| s.true_cate.is_some());
    let with_prop = !data.is_empty() && data.samples.iter().all(|s| s.true_propensity.is_some());

    let mut header: Vec<String> = (0..dim).map(|i| format!("x_{i}")).collect();
    header.push("a".into());
    header.push("y".into());
    if with_tau {
        header.push("tau".into());
    }
    if with_prop {
        header.push("pi_b".into());
    }
    w.write_record(&header)?;

    for s in &data.samples {
        let mut rec: Vec<String> = s.x.iter().map(|v| format!("{v}")).collect();
        rec.push(s.a.to_string());
        rec.push(format!("{}", s.y));
        if with_tau {
            rec.push(format!("{}", s.true_cate.expect("checked above")));
        }
        if with_prop {
            rec.push(format!("{}", s.true_propensity.expect("checked above")));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::mean;

    #[test]
    fn fig2_response_hand_values() {
        let spec = DgpSpec::preset(DgpName::Fig2Sigmoid);
        for x in [-0.5, -0.1, 0.0, 0.3] {
            assert_eq!(true_response(&spec, 0, x), 0.0);
        }
        assert!((true_response(&spec, 1, 0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fig1_response_hand_values() {
        let spec = DgpSpec::preset(DgpName::Fig1Piecewise);
        // middle piece at x=0: 2*sigmoid(20) - 0.5 ~ 1.5 to four decimals
        assert!((true_response(&spec, 1, 0.0) - 1.5).abs() < 1e-4);
        assert_eq!(true_response(&spec, 0, 0.37), 0.0);
        // left piece at x=-0.4: 0.6*sin(8*(-0.15)) + 0.3
        let expect = 0.6 * (-1.2f64).sin() + 0.3;
        assert!((true_response(&spec, 1, -0.4) - expect).abs() < 1e-12);
        // right piece at x=0.5: 0.5*sin(4.0)
        let expect = 0.5 * (4.0f64).sin();
        assert!((true_response(&spec, 1, 0.5) - expect).abs() < 1e-12);
    }

    #[test]
    fn fig2_cate_root_is_analytic() {
        let spec = DgpSpec::preset(DgpName::Fig2Sigmoid);
        assert!((true_cate(&spec, 0.0) - 0.5).abs() < 1e-12);
        let root = (1.0f64 / 3.0).ln() / 10.0;
        assert!(true_cate(&spec, root).abs() < 1e-12);
        assert!((root + 0.109861).abs() < 1e-6);
    }

    #[test]
    fn fig2_cate_changes_sign_exactly_once() {
        let spec = DgpSpec::preset(DgpName::Fig2Sigmoid);
        let n = 10_000;
        let mut changes = 0;
        let mut prev = true_cate(&spec, -0.5);
        for i in 1..=n {
            let x = -0.5 + (i as f64) / (n as f64);
            let t = true_cate(&spec, x);
            if prev.signum() != t.signum() {
                changes += 1;
            }
            prev = t;
        }
        assert_eq!(changes, 1);
    }

    #[test]
    fn settings_share_their_figure_responses() {
        let a = DgpSpec::preset(DgpName::SettingA);
        let fig2 = DgpSpec::preset(DgpName::Fig2Sigmoid);
        let b = DgpSpec::preset(DgpName::SettingB);
        let fig1 = DgpSpec::preset(DgpName::Fig1Piecewise);
        for i in 0..100 {
            let x = -0.5 + (i as f64) / 99.0;
            assert_eq!(true_cate(&a, x), true_cate(&fig2, x));
            assert_eq!(true_cate(&b, x), true_cate(&fig1, x));
        }
        assert_eq!(a.propensity, PropensityKind::Constant(0.5));
        assert_eq!(b.propensity, PropensityKind::Logistic { scale: 0.1 });
        assert_eq!((a.n_train, a.n_test), (2200, 3000));
    }

    #[test]
    fn setting_b_propensity_respects_overlap_bounds() {
        let spec = DgpSpec::preset(DgpName::SettingB);
        for i in 0..=1000 {
            let x = -0.5 + (i as f64) / 1000.0;
            let p = spec.propensity.eval(x);
            assert!((0.4875..=0.5125).contains(&p), "propensity {p} at {x}");
        }
    }

    #[test]
    fn sampling_matches_design() {
        let spec = DgpSpec::preset(DgpName::SettingA);
        let n = 100_000;
        let data = sample_dgp(&spec, n, 7).unwrap();
        assert_eq!(data.len(), n);
        let rate = mean(&data.samples.iter().map(|s| f64::from(s.a)).collect::<Vec<_>>());
        assert!((rate - 0.5).abs() < 0.01, "treatment rate {rate}");
        for s in &data.samples {
            assert!((-0.5..0.5).contains(&s.x[0]));
            assert_eq!(s.true_propensity, Some(0.5));
        }

        // Determinism
        let again = sample_dgp(&spec, n, 7).unwrap();
        assert_eq!(data, again);
        let other = sample_dgp(&spec, n, 8).unwrap();
        assert_ne!(data, other);
    }

    #[test]
    fn zero_noise_gives_exact_responses() {
        let mut spec = DgpSpec::preset(DgpName::Fig1Piecewise);
        spec.noise_sd = 0.0;
        let data = sample_dgp(&spec, 500, 3).unwrap();
        for s in &data.samples {
            assert_eq!(s.y, true_response(&spec, s.a, s.x[0]));
        }
    }

    /// Monte Carlo response check: binned means of Y converge to the binned
    /// means of mu_a within three standard errors.
    #[test]
    fn binned_outcome_means_match_responses() {
        for name in [
            DgpName::Fig1Piecewise,
            DgpName::Fig2Sigmoid,
            DgpName::SettingA,
            DgpName::SettingB,
        ] {
            let spec = DgpSpec::preset(name);
            let data = sample_dgp(&spec, 100_000, 11).unwrap();
            let n_bins = 20;
            for arm in [0u8, 1u8] {
                let mut residuals: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
                for s in data.samples.iter().filter(|s| s.a == arm) {
                    let t = ((s.x[0] + 0.5) * n_bins as f64).floor() as usize;
                    let b = t.min(n_bins - 1);
                    residuals[b].push(s.y - true_response(&spec, arm, s.x[0]));
                }
                for (b, res) in residuals.iter().enumerate() {
                    assert!(res.len() > 100, "bin {b} unexpectedly sparse");
                    let m = mean(res);
                    let se = crate::math::sample_std(res) / (res.len() as f64).sqrt();
                    assert!(
                        m.abs() < 3.0 * se.max(1e-12),
                        "{name:?} arm {arm} bin {b}: residual mean {m} exceeds 3se {se}"
                    );
                }
            }
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let spec = DgpSpec::preset(DgpName::SettingA);
        let mut data = sample_dgp(&spec, 64_000, 0).unwrap();
        // strip ground truth to mimic real data; irrelevant to splitting
        for s in &mut data.samples {
            s.true_cate = None;
        }
        let split_spec = SplitSpec::new(0.5, 0.2, 0.3, 42).unwrap();
        let (tr, va, te) = split(&data, &split_spec).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (32_000, 12_800, 19_200));

        let (tr2, va2, te2) = split(&data, &split_spec).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(va, va2);
        assert_eq!(te, te2);
    }

    #[test]
    fn degenerate_split_is_identity() {
        let spec = DgpSpec::preset(DgpName::Fig2Sigmoid);
        let data = sample_dgp(&spec, 100, 0).unwrap();
        let (tr, va, te) = split(&data, &SplitSpec::new(1.0, 0.0, 0.0, 1).unwrap()).unwrap();
        assert_eq!(tr.len(), 100);
        assert!(va.is_empty() && te.is_empty());
        let mut seen: Vec<_> = tr.samples.iter().map(|s| s.x[0].to_bits()).collect();
        seen.sort_unstable();
        let mut orig: Vec<_> = data.samples.iter().map(|s| s.x[0].to_bits()).collect();
        orig.sort_unstable();
        assert_eq!(seen, orig);
    }

    #[test]
    fn empty_split_rejected() {
        let empty = Dataset::default();
        assert!(split(&empty, &SplitSpec::new(0.5, 0.2, 0.3, 0).unwrap()).is_err());
        assert!(SplitSpec::new(0.7, 0.2, 0.3, 0).is_err());
        assert!(SplitSpec::new(-0.1, 0.6, 0.5, 0).is_err());
    }

    #[test]
    fn csv_round_trip_columns() {
        let spec = DgpSpec::preset(DgpName::Fig2Sigmoid);
        let data = sample_dgp(&spec, 10, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_csv(&data, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "x_0,a,y,tau,pi_b");
        assert_eq!(text.lines().count(), 11);
    }
}
