// Scratch calibration probe for the linear-class retargeting defaults.
// Not part of the deliverable surface; run manually:
//   cargo run --release -p ptcate-core --example calibrate

use ptcate_core::datagen::{sample_dgp, DgpName, DgpSpec};
use ptcate_core::math::derive_seed;
use ptcate_core::nuisance::oracle_nuisance;
use ptcate_core::pseudo::{build_pseudo_dataset, PseudoOutcomeKind};
use ptcate_core::ptcate::{train_ptcate, PtConfig};

fn main() {
    let x_star = (1.0f64 / 3.0).ln() / 10.0;
    let spec = DgpSpec::preset(DgpName::Fig2Sigmoid);
    let nuis = oracle_nuisance(&spec);

    let grid: Vec<(f64, usize, usize, f64, f64)> = vec![
        // (floor, e2, e3, lr_g, lr_alpha)
        (1.0, 1000, 1000, 1e-3, 1e-2), // current defaults
        (1.0, 2000, 1000, 1e-3, 1e-2),
        (1.0, 2000, 2000, 1e-3, 1e-2),
        (0.5, 2000, 1000, 1e-3, 1e-2),
        (0.2, 2000, 1000, 1e-3, 1e-2),
        (1.0, 1000, 1000, 1e-2, 1e-2),
        (0.5, 1000, 1000, 1e-2, 1e-2),
        (0.2, 1000, 1000, 1e-2, 1e-2),
        (0.2, 2000, 1000, 1e-2, 2e-2),
    ];

    for (floor, e2, e3, lr_g, lr_alpha) in grid {
        let mut err0 = Vec::new();
        let mut err9 = Vec::new();
        for seed in 0..5u64 {
            let train = sample_dgp(&spec, spec.n_train, derive_seed(seed, 1001)).unwrap();
            let pseudo = build_pseudo_dataset(PseudoOutcomeKind::Pi, &nuis, &train).unwrap();
            for gamma in [0.0, 0.9] {
                let mut cfg = PtConfig::linear_g(1, PseudoOutcomeKind::Pi)
                    .unwrap()
                    .with_alpha_floor(floor)
                    .with_gamma(gamma);
                cfg.epochs_alpha = e2;
                cfg.epochs_refine = e3;
                cfg.lr_g = lr_g;
                cfg.lr_alpha = lr_alpha;
                let m = train_ptcate(&pseudo, &cfg, seed).unwrap();
                let w = m.g_params.layers[0].weights[0];
                let b = m.g_params.layers[0].biases[0];
                let err = (-b / w - x_star).abs();
                if gamma == 0.0 {
                    err0.push(err);
                } else {
                    err9.push(err);
                }
            }
        }
        let m0: f64 = err0.iter().sum::<f64>() / 5.0;
        let m9: f64 = err9.iter().sum::<f64>() / 5.0;
        println!(
            "floor={floor:<4} e2={e2:<5} e3={e3:<5} lr_g={lr_g:<7} lr_a={lr_alpha:<6} err0={m0:.4} err9={m9:.4} reduction={:.1}%",
            100.0 * (1.0 - m9 / m0)
        );
    }
}
