use bpcf_core::bcf::BcfModel;
use bpcf_core::engine::ModifierTrace;
use bpcf_core::estimands::{
    cep_surface, intervals_from_sd_multiples, modifier_surface, partition, pce, per_draw_pce, replication_metrics,
    stratum_sums, Pce, StratumInterval,
};
use bpcf_core::forest::{Forest, LeafScalePrior};
use bpcf_core::tree::{SplitRule, Tree, ROOT};
use bpcf_core::{Matrix, ModifierMode, PosteriorDraws};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_draws(draws: usize, units: usize, seed: u64) -> PosteriorDraws {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = PosteriorDraws::default();
    for _ in 0..draws {
        let m0: Vec<f64> = (0..units).map(|_| rng.random::<f64>()).collect();
        let m1: Vec<f64> = m0.iter().map(|v| v + 4.0 * rng.random::<f64>() - 1.0).collect();
        let y0: Vec<f64> = (0..units).map(|_| rng.random::<f64>()).collect();
        let y1: Vec<f64> = y0.iter().map(|v| v - 3.0 * rng.random::<f64>()).collect();
        d.m0.push(m0);
        d.m1.push(m1);
        d.y0.push(y0);
        d.y1.push(y1);
    }
    d
}

fn per_draw_ate(d: &PosteriorDraws, r: usize) -> f64 {
    d.y1[r].iter().zip(&d.y0[r]).map(|(a, b)| a - b).sum::<f64>() / d.n_units() as f64
}

#[test]
fn whole_line_is_the_sample_ate_in_every_draw() {
    let d = random_draws(30, 40, 1);
    let per = per_draw_pce(&d, &StratumInterval::whole_line());
    for (r, v) in per.iter().enumerate() {
        assert!((v.unwrap() - per_draw_ate(&d, r)).abs() <= 1e-12);
    }
}

#[test]
fn partition_pces_reconstruct_the_ate_in_every_draw() {
    let d = random_draws(30, 40, 2);
    let parts = partition(&[-0.5, 0.0, 0.7, 1.5, 2.2]).unwrap();
    let sums: Vec<Vec<(f64, usize)>> = parts.iter().map(|p| stratum_sums(&d, p)).collect();
    let pces: Vec<Vec<Option<f64>>> = parts.iter().map(|p| per_draw_pce(&d, p)).collect();
    for r in 0..d.n_draws() {
        let mut total = 0.0;
        let mut n = 0;
        for k in 0..parts.len() {
            let c = sums[k][r].1;
            n += c;
            if let Some(v) = pces[k][r] {
                total += c as f64 * v;
            }
        }
        assert_eq!(n, d.n_units());
        assert!((total / n as f64 - per_draw_ate(&d, r)).abs() <= 1e-12);
    }
}

#[test]
fn shrinking_intervals_never_gain_members() {
    let d = random_draws(20, 50, 3);
    let centre = 1.0;
    let mut last = f64::INFINITY;
    for w in [3.0, 2.0, 1.0, 0.5, 0.2, 0.05] {
        match pce(&d, &StratumInterval::open(centre - w, centre + w).unwrap()).unwrap() {
            Pce::Estimate(e) => {
                assert!(e.avg_stratum_n <= last);
                assert!(e.ci95.0 <= e.posterior_mean && e.posterior_mean <= e.ci95.1);
                last = e.avg_stratum_n;
            }
            Pce::EmptyStratum => last = 0.0,
        }
    }
    assert_eq!(pce(&d, &StratumInterval::open(50.0, 60.0).unwrap()).unwrap(), Pce::EmptyStratum);
}

#[test]
fn sd_multiple_boundaries_follow_the_direct_sd() {
    let d = random_draws(10, 25, 4);
    let delta: Vec<f64> = (0..25)
        .map(|i| (0..10).map(|r| d.m1[r][i] - d.m0[r][i]).sum::<f64>() / 10.0)
        .collect();
    let mean = delta.iter().sum::<f64>() / 25.0;
    let sd = (delta.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 24.0).sqrt();
    let (s, parts) = intervals_from_sd_multiples(&d, &[0.2, 0.5]).unwrap();
    assert!((s - sd).abs() < 1e-12);
    let bounds: Vec<f64> = parts.iter().skip(1).map(|p| p.lower).collect();
    let want = [-0.5 * sd, -0.2 * sd, 0.0, 0.2 * sd, 0.5 * sd];
    assert_eq!(parts.len(), 6);
    for (b, w) in bounds.iter().zip(want) {
        assert!((b - w).abs() < 1e-12);
    }
}

#[test]
fn replication_metrics_match_a_direct_recomputation() {
    let est = [-4.1, -4.9, -3.8, -5.2, -4.4];
    let truth = -4.54;
    let m = replication_metrics(&est, truth).unwrap();
    let mut total = 0.0;
    let mut sq = 0.0;
    for e in est {
        total += e;
        sq += (e - truth) * (e - truth);
    }
    let mean = total / 5.0;
    assert!((m.rbias.unwrap() - (mean - truth) / truth).abs() < 1e-12);
    assert!((m.mse - sq / 5.0).abs() < 1e-12);
}

fn permuted(d: &PosteriorDraws, units: &[usize], draws: &[usize]) -> PosteriorDraws {
    let pick = |v: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        draws.iter().map(|&r| units.iter().map(|&i| v[r][i]).collect()).collect()
    };
    PosteriorDraws {
        m0: pick(&d.m0),
        m1: pick(&d.m1),
        y0: pick(&d.y0),
        y1: pick(&d.y1),
        ..PosteriorDraws::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn pce_ignores_unit_and_draw_order(
        seed in 0u64..1000,
        units in Just((0..12usize).collect::<Vec<_>>()).prop_shuffle(),
        draws in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(),
        lo in -1.0f64..1.5,
        width in 0.1f64..3.0,
    ) {
        let d = random_draws(6, 12, seed);
        let p = permuted(&d, &units, &draws);
        let iv = StratumInterval::open(lo, lo + width).unwrap();
        match (pce(&d, &iv).unwrap(), pce(&p, &iv).unwrap()) {
            (Pce::Estimate(a), Pce::Estimate(b)) => {
                prop_assert!((a.posterior_mean - b.posterior_mean).abs() < 1e-12);
                prop_assert!((a.posterior_sd - b.posterior_sd).abs() < 1e-12);
                prop_assert!((a.ci95.0 - b.ci95.0).abs() < 1e-12 && (a.ci95.1 - b.ci95.1).abs() < 1e-12);
                prop_assert_eq!(a.avg_stratum_n, b.avg_stratum_n);
            }
            (a, b) => prop_assert_eq!(a, b),
        }
    }
}

fn fixture_trace() -> ModifierTrace {
    let x = Matrix::from_rows(&[vec![0.1], vec![0.6], vec![0.9]]).unwrap();
    let mut forests = Vec::new();
    for shift in [0.0, 0.5] {
        let mut f = Forest::new(2, 3, 1.0, LeafScalePrior::Fixed).unwrap();
        let mut t = Tree::stump(3, 0.0);
        t.grow(ROOT, SplitRule { var: 1, cutpoint: 0.2 + shift }, -1.0, 2.0);
        let (l, _) = t.children(ROOT).unwrap();
        t.grow(l, SplitRule { var: 0, cutpoint: 0.5 }, 0.3, -0.7);
        f.trees[0] = t;
        let mut u = Tree::stump(3, 0.0);
        u.grow(ROOT, SplitRule { var: 2, cutpoint: -0.3 }, 1.5, 0.25 + shift);
        f.trees[1] = u;
        forests.push(f);
    }
    ModifierTrace {
        x,
        mode: ModifierMode::Full,
        m_center: 10.0,
        m_scale: 4.0,
        y_scale: 2.5,
        forests,
    }
}

#[test]
fn surface_cells_match_conditional_mean_differences() {
    let trace = fixture_trace();
    let g0: Vec<f64> = (0..7).map(|k| 6.0 + 1.3 * k as f64).collect();
    let g1: Vec<f64> = (0..9).map(|k| 5.0 + 1.1 * k as f64).collect();
    let surface = modifier_surface(&trace, &g0, &g1).unwrap();
    let mut mu = Tree::stump(2, 0.0);
    mu.grow(ROOT, SplitRule { var: 0, cutpoint: 0.4 }, 0.8, -0.2);
    for (j, k) in [(0, 0), (3, 2), (6, 8), (2, 7), (5, 4)] {
        let mut acc = 0.0;
        for forest in &trace.forests {
            let mut model = BcfModel::new(1, 2, 2, 3, 1.0, 1.0).unwrap();
            model.mu.trees[0] = mu.clone();
            model.tau = forest.clone();
            for i in 0..3 {
                let x = trace.x.row(i)[0];
                let row = [x, (g1[k] - 10.0) / 4.0, (g0[j] - 10.0) / 4.0];
                let diff = model.conditional_mean(&[x, 0.5], true, &row).unwrap()
                    - model.conditional_mean(&[x, 0.5], false, &row).unwrap();
                acc += 2.5 * diff;
            }
        }
        let want = acc / 6.0;
        assert!((surface[j][k] - want).abs() < 1e-12, "cell ({j},{k}): {} vs {want}", surface[j][k]);
    }
}

#[test]
fn m_only_surface_and_degenerate_grids() {
    let mut trace = fixture_trace();
    let mut f = Forest::new(1, 2, 1.0, LeafScalePrior::Fixed).unwrap();
    let mut t = Tree::stump(2, 0.0);
    t.grow(ROOT, SplitRule { var: 0, cutpoint: 0.0 }, -2.0, 3.0);
    f.trees[0] = t;
    trace.mode = ModifierMode::MOnly;
    trace.forests = vec![f];
    let s = modifier_surface(&trace, &[10.0], &[9.0, 10.0, 11.0]).unwrap();
    assert_eq!(s, vec![vec![-5.0, 7.5, 7.5]]);

    trace.forests = vec![Forest::new(3, 2, 1.0, LeafScalePrior::Fixed).unwrap()];
    let s = modifier_surface(&trace, &[1.0, 2.0], &[3.0]).unwrap();
    assert_eq!(s, vec![vec![0.0], vec![0.0]]);
    assert!(modifier_surface(&trace, &[], &[1.0]).is_err());
    assert!(modifier_surface(&trace, &[2.0, 1.0], &[1.0]).is_err());

    let mut d = random_draws(2, 3, 5);
    assert!(cep_surface(&d, &[1.0], &[1.0]).is_err());
    d.modifier = Some(fixture_trace());
    let c = cep_surface(&d, &[10.0], &[11.0]).unwrap();
    assert_eq!(c.points.len(), 3);
    let single = modifier_surface(d.modifier.as_ref().unwrap(), &[10.0], &[11.0]).unwrap();
    let direct: f64 = (0..2)
        .flat_map(|r| (0..3).map(move |i| (r, i)))
        .map(|(r, i)| d.modifier.as_ref().unwrap().effect(r, i, 11.0, 10.0))
        .sum::<f64>()
        / 6.0;
    assert!((single[0][0] - direct).abs() < 1e-12);
    assert_eq!(c.values, single);
}
