use bpcf_core::diagnostics::pearson;
use bpcf_core::estimands::StratumInterval;
use bpcf_core::simgen::{
    gen_scenario1, gen_targeted_selection, scenario1_intervals, targeted_prognostic, true_pce_oracle,
    TargetedSelection, SCENARIO1_TRUTHS,
};

// E|Z| for a standard normal.
fn mean_abs_normal() -> f64 {
    (2.0 / std::f64::consts::PI).sqrt()
}

// E[−(2+|Z|)² | a < 2+|Z| < b] by midpoint quadrature of the half-normal density.
fn half_normal_conditional_mean(a: f64, b: f64) -> f64 {
    let (lo, hi) = ((a - 2.0).max(0.0), b - 2.0);
    let steps = 200_000;
    let h = (hi - lo) / steps as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..steps {
        let z = lo + (k as f64 + 0.5) * h;
        let w = (-0.5 * z * z).exp();
        num += -(2.0 + z).powi(2) * w;
        den += w;
    }
    num / den
}

#[test]
fn oracle_truths_match_quadrature_and_the_reference_table() {
    let intervals = scenario1_intervals();
    let tolerances = [0.05, 0.1, 0.1, 0.1, 0.15];
    for (k, iv) in intervals.iter().enumerate() {
        let mc = true_pce_oracle(iv, 1_000_000, 11 + k as u64).unwrap();
        let quad = half_normal_conditional_mean(iv.lower, iv.upper);
        assert!((mc - quad).abs() < 0.02, "interval {k}: {mc} vs {quad}");
        assert!((quad - SCENARIO1_TRUTHS[k + 1]).abs() <= tolerances[k], "interval {k}: {quad}");
    }
    let whole = true_pce_oracle(&StratumInterval::whole_line(), 1_000_000, 5).unwrap();
    let closed = -(5.0 + 4.0 * mean_abs_normal());
    assert!((whole - closed).abs() < 0.02, "{whole} vs {closed}");
    assert!((2.0 + mean_abs_normal() - SCENARIO1_TRUTHS[0]).abs() < 0.01);
}

#[test]
fn scenario_one_marginals() {
    let s = gen_scenario1(5000, 8).unwrap();
    let n = s.data.n() as f64;
    for j in 0..7 {
        let col = s.data.x.column(j);
        let m = col.iter().sum::<f64>() / n;
        let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((v - 1.0).abs() < 0.08, "var x{j} = {v}");
    }
    let rate = s.data.treatment.iter().filter(|&&a| a).count() as f64 / n;
    assert!(rate > 0.3 && rate < 0.9, "{rate}");
    let d = s.intermediate_effects();
    let mean = d.iter().sum::<f64>() / n;
    assert!((mean - 2.0 - mean_abs_normal()).abs() < 0.03);
    for (dm, dy) in d.iter().zip(s.outcome_effects()) {
        assert!(*dm >= 2.0);
        assert!((dy + dm * dm).abs() < 1e-9);
    }
    assert_eq!(s, gen_scenario1(5000, 8).unwrap());
    assert_ne!(s, gen_scenario1(5000, 9).unwrap());
}

#[test]
fn targeted_selection_links_propensity_to_the_prognosis() {
    let strong = gen_targeted_selection(5000, &TargetedSelection::default(), 3).unwrap();
    let mu: Vec<f64> = strong.data.x.iter_rows().map(targeted_prognostic).collect();
    assert!(pearson(&strong.propensity, &mu) > 0.5);

    let none = TargetedSelection { strength: 0.0, ..TargetedSelection::default() };
    let null = gen_targeted_selection(5000, &none, 3).unwrap();
    let mu: Vec<f64> = null.data.x.iter_rows().map(targeted_prognostic).collect();
    assert!(pearson(&null.propensity, &mu).abs() < 0.05);
    for i in 0..null.data.n() {
        assert!((null.y0[i] - mu[i]).abs() < 2.0);
    }
    assert_eq!(null, gen_targeted_selection(5000, &none, 3).unwrap());
}
