use bpcf_core::bcf::{BcfGrids, BcfModel, BcfSettings};
use bpcf_core::forest::{half_cauchy_scale_for_q3, NoisePrior, SweepSettings};
use bpcf_core::tree::{CutpointGrid, TreePrior};
use bpcf_core::{Matrix, ModifierScale};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Fixture {
    prognostic: Matrix,
    modifier: Matrix,
    treated: Vec<usize>,
    y: Vec<f64>,
}

fn fixture(n: usize, noise: f64, seed: u64, f: impl Fn(&[f64], bool) -> f64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let a: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.5).collect();
    let y: Vec<f64> = x
        .iter()
        .zip(&a)
        .map(|(r, &t)| f(r, t) + noise * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let modifier = Matrix::from_rows(&x).unwrap();
    let prognostic = modifier.hstack(&[vec![0.5; n]]).unwrap();
    Fixture {
        prognostic,
        modifier,
        treated: (0..n).filter(|&i| a[i]).collect(),
        y,
    }
}

fn settings() -> BcfSettings {
    BcfSettings {
        mu: SweepSettings::new(TreePrior::PROGNOSTIC),
        tau: SweepSettings::new(TreePrior::MODIFIER),
        noise: NoisePrior::calibrated(3.0, 0.9, 1.0).unwrap(),
    }
}

// Runs the model and returns the posterior means of (average τ over treated rows, σ).
fn fit(fx: &Fixture, iterations: usize, burn: usize, seed: u64) -> (f64, f64) {
    let grids = BcfGrids {
        prognostic: CutpointGrid::from_design(&fx.prognostic, 100),
        modifier: CutpointGrid::from_design(&fx.modifier, 100),
    };
    let s = settings();
    let mut model = BcfModel::new(50, 20, 3, 2, 1.0, half_cauchy_scale_for_q3(2.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut tau, mut sigma) = (0.0, 0.0);
    for it in 0..iterations {
        model
            .fit_iteration(&fx.y, &fx.treated, &fx.prognostic, &fx.modifier, &grids, &s, &mut rng)
            .unwrap();
        assert_eq!(model.modifier_scale, ModifierScale::Residual);
        assert_eq!(model.tau.leaf_scale, model.sigma / (20f64).sqrt());
        if it >= burn {
            tau += model.tau_fitted().iter().sum::<f64>() / fx.treated.len() as f64;
            sigma += model.sigma;
        }
    }
    let kept = (iterations - burn) as f64;
    (tau / kept, sigma / kept)
}

#[test]
fn constant_effect_is_recovered() {
    let fx = fixture(500, 0.3, 1, |_, a| 1.0 + 2.0 * f64::from(u8::from(a)));
    let (tau, _) = fit(&fx, 600, 200, 2);
    assert!((1.8..=2.2).contains(&tau), "{tau}");
}

#[test]
fn residual_sd_is_recovered() {
    let fx = fixture(300, 0.3, 3, |x, a| (3.0 * x[0]).sin() + x[1] + 0.5 * f64::from(u8::from(a)));
    let (_, sigma) = fit(&fx, 800, 300, 4);
    assert!((0.27..=0.33).contains(&sigma), "{sigma}");
}

#[test]
fn without_treated_rows_the_modifier_stays_at_its_prior() {
    let mut fx = fixture(100, 0.3, 5, |x, _| x[0]);
    fx.treated.clear();
    let grids = BcfGrids {
        prognostic: CutpointGrid::from_design(&fx.prognostic, 100),
        modifier: CutpointGrid::from_design(&fx.modifier, 100),
    };
    let mut model = BcfModel::new(10, 5, 3, 2, 1.0, 0.8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut sq = 0.0;
    let reps = 400;
    for _ in 0..reps {
        model
            .fit_iteration(&fx.y, &fx.treated, &fx.prognostic, &fx.modifier, &grids, &settings(), &mut rng)
            .unwrap();
        assert!(model.tau.trees.iter().all(|t| t.num_leaves() == 1));
        let v = model.tau.trees[0].evaluate(&[0.5, 0.5]).unwrap();
        sq += (v / model.tau.leaf_scale).powi(2);
    }
    // standardized prior draws have unit second moment
    let m2 = sq / reps as f64;
    assert!((m2 - 1.0).abs() < 0.25, "{m2}");
}
