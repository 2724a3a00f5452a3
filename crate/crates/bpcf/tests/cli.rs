use std::fs;
use std::path::Path;
use std::process::Command;

use bpcf::commands::{cmd_fit, cmd_pce, cmd_simulate, cmd_surface, Method, StrataSpec};
use bpcf::config::{RunConfig, RunProfile};
use bpcf::data::{read_dataset, ColumnRoles};
use bpcf::error::Error;
use bpcf_core::estimands::{Pce, StratumInterval};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bpcf"));
    c.env("RUST_LOG", "warn");
    c
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

/// Writes a draws directory whose four matrices are given per draw as
/// `(m0, m1, y0, y1)` rows.
fn write_fixture(dir: &Path, draws: &[[&[f64]; 4]]) {
    let n = draws[0][0].len();
    let header: Vec<String> = std::iter::once("draw".to_string()).chain((1..=n).map(|i| i.to_string())).collect();
    for (k, name) in ["M0.csv", "M1.csv", "Y0.csv", "Y1.csv"].iter().enumerate() {
        let mut text = header.join(",") + "\n";
        for (r, d) in draws.iter().enumerate() {
            let row: Vec<String> = d[k].iter().map(|v| format!("{v:?}")).collect();
            text += &format!("{r},{}\n", row.join(","));
        }
        write(&dir.join(name), &text);
    }
}

fn smoke() -> RunConfig {
    RunConfig::from_profile(RunProfile::Smoke)
}

#[test]
fn missing_intermediate_column_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write(&path, "id,A,Y,X1\n1,1,0.5,0.1\n2,0,0.2,0.3\n");
    match read_dataset(&path, &ColumnRoles::default()) {
        Err(Error::Schema { column, row, .. }) => assert_eq!((column.as_str(), row), ("M", 1)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn bad_cells_report_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write(&path, "id,A,M,Y,X1\n1,1,0.5,0.1,2\n2,0,NA,0.3,1\n");
    match read_dataset(&path, &ColumnRoles::default()) {
        Err(Error::Schema { column, row, .. }) => assert_eq!((column.as_str(), row), ("M", 3)),
        other => panic!("{other:?}"),
    }
    write(&path, "id,A,M,Y,X1\n1,2,0.5,0.1,2\n2,0,1,0.3,1\n");
    match read_dataset(&path, &ColumnRoles::default()) {
        Err(Error::Schema { column, row, .. }) => assert_eq!((column.as_str(), row), ("A", 2)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn single_arm_data_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write(&path, "id,A,M,Y,X1\n1,1,0.5,0.1,2\n2,1,0.7,0.3,1\n");
    assert!(matches!(read_dataset(&path, &ColumnRoles::default()), Err(Error::Core(_))));
}

#[test]
fn sidecar_roles_select_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write(&path, "unit,trt,so2,pm,w1,w2,junk\na,1,0.5,0.1,2,5,x\nb,0,0.7,0.3,1,6,y\n");
    let roles = ColumnRoles::parse(
        "id = unit\ntreatment = trt\nintermediate = so2\noutcome = pm\ncovariates = w1, w2\npropensity_covariates = w2\n",
    )
    .unwrap();
    let d = read_dataset(&path, &roles).unwrap();
    assert_eq!(d.ids, vec!["a", "b"]);
    assert_eq!(d.data.x.row(1), &[1.0, 6.0]);
    assert_eq!(d.propensity_x.cols(), 1);
    assert_eq!(d.data.m, vec![0.5, 0.7]);
}

#[test]
fn pce_table_matches_hand_enumeration() {
    // Draw 1: deltas (1, 3, 5), effects (10, 20, 30).
    // Draw 2: deltas (2, 2, 6), effects (1, 2, 3).
    let dir = tempfile::tempdir().unwrap();
    write_fixture(
        dir.path(),
        &[
            [&[0.0, 0.0, 0.0], &[1.0, 3.0, 5.0], &[0.0, 0.0, 0.0], &[10.0, 20.0, 30.0]],
            [&[1.0, 1.0, 1.0], &[3.0, 3.0, 7.0], &[5.0, 5.0, 5.0], &[6.0, 7.0, 8.0]],
        ],
    );
    let out = dir.path().join("pce");
    let spec = StrataSpec::Explicit(vec![
        StratumInterval::open(0.0, 2.5).unwrap(),
        StratumInterval::open(2.5, 10.0).unwrap(),
        StratumInterval::open(100.0, 200.0).unwrap(),
    ]);
    let rows = cmd_pce(&smoke(), dir.path(), &spec, &out).unwrap();
    // (0, 2.5): draw 1 {10}, draw 2 {1, 2}: ratio of sums 13/3, per-draw means 10 and 1.5.
    let e = rows[0].result.estimate().unwrap();
    assert!((e.posterior_mean - 13.0 / 3.0).abs() < 1e-12);
    assert!((e.avg_stratum_n - 1.5).abs() < 1e-12);
    assert!((e.posterior_sd - (8.5f64 * 8.5 / 2.0).sqrt()).abs() < 1e-12);
    // (2.5, 10): draw 1 {20, 30}, draw 2 {3}: 53/3.
    let e = rows[1].result.estimate().unwrap();
    assert!((e.posterior_mean - 53.0 / 3.0).abs() < 1e-12);
    assert_eq!(rows[2].result, Pce::EmptyStratum);

    let text = fs::read_to_string(out.join("pce.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("stratum,lower,upper,lower_closed,status,posterior_mean"));
    assert!(lines[3].contains(",empty_stratum,NA,"));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn whole_line_pce_is_the_ate() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(
        dir.path(),
        &[
            [&[0.0, 0.0], &[1.0, -3.0], &[0.0, 1.0], &[2.0, 4.0]],
            [&[1.0, 1.0], &[0.0, 3.0], &[5.0, 5.0], &[6.0, 2.0]],
        ],
    );
    let rows = cmd_pce(
        &smoke(),
        dir.path(),
        &StrataSpec::Explicit(vec![StratumInterval::whole_line()]),
        &dir.path().join("o"),
    )
    .unwrap();
    // Per-draw ATEs 2.5 and −1.
    let e = rows[0].result.estimate().unwrap();
    assert!((e.posterior_mean - 0.75).abs() < 1e-15);
    assert_eq!(e.avg_stratum_n, 2.0);
}

#[test]
fn smoke_simulation_writes_six_estimand_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke();
    cfg.replications = 1;
    let table = cmd_simulate(&cfg, &[Method::Bpcf, Method::BartPce], dir.path()).unwrap();
    assert_eq!(table.len(), 6);
    let text = fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[0], "estimand,truth,bpcf_rbias,bpcf_mse,bpcf_n,bart_pce_rbias,bart_pce_mse,bart_pce_n");
    assert!(lines[1].starts_with("ate_m,2.79,"));
    let reps = fs::read_to_string(dir.path().join("replications.csv")).unwrap();
    assert_eq!(reps.lines().count(), 1 + 2 * 6);
}

#[test]
fn simulation_is_independent_of_worker_count() {
    let mut cfg = smoke();
    cfg.replications = 3;
    let one = bpcf::commands::simulate(&cfg, &[Method::Bpcf], 1).unwrap();
    let three = bpcf::commands::simulate(&cfg, &[Method::Bpcf], 3).unwrap();
    assert_eq!(one, three);
    assert_eq!(one.iter().map(|r| r.replication).collect::<Vec<_>>(), vec![0, 1, 2]);
}

#[test]
fn fit_then_surface_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let status = bin()
        .args(["--profile", "smoke", "--seed", "5", "--out"])
        .arg(&gen)
        .args(["generate", "--n", "120"])
        .status()
        .unwrap();
    assert!(status.success());
    let fit = dir.path().join("fit");
    let summary = cmd_fit(&smoke(), &gen.join("data.csv"), None, &fit).unwrap();
    assert_eq!(summary.n_units, 120);
    assert_eq!(summary.n_draws, 10);
    for f in ["M0.csv", "M1.csv", "Y0.csv", "Y1.csv", "tau_y_forests.txt", "summary.json", "propensity.csv", "prognostic.csv", "diagnostics.json", "manifest.json"] {
        assert!(fit.join(f).exists(), "{f}");
    }
    let cells = cmd_surface(&smoke(), &fit, 1, &dir.path().join("s1")).unwrap();
    assert_eq!(cells, 1);
    let cells = cmd_surface(&smoke(), &fit, 40, &dir.path().join("s40")).unwrap();
    assert_eq!(cells, 1600);
    let points = fs::read_to_string(dir.path().join("s40/points.csv")).unwrap();
    assert_eq!(points.lines().count(), 121);

    let rows = cmd_pce(&smoke(), &fit, &StrataSpec::SdMultiples(vec![0.2, 0.5]), &dir.path().join("p")).unwrap();
    assert_eq!(rows.len(), 6);
}

#[test]
fn cli_reports_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write(&path, "id,A,Y,X1\n1,1,0.5,0.1\n2,0,0.2,0.3\n");
    let out = bin()
        .args(["--profile", "smoke", "--out"])
        .arg(dir.path().join("o"))
        .arg("fit")
        .arg("--data")
        .arg(&path)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("column 'M'"), "{err}");
}

#[test]
fn config_file_and_flags_compose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    write(&cfg, "profile = smoke\nsim_n = 80\nreplications = 5\n");
    let out = dir.path().join("o");
    let status = bin()
        .arg("--config")
        .arg(&cfg)
        .args(["--replications", "1", "--seed", "9", "--out"])
        .arg(&out)
        .args(["simulate", "--methods", "bpcf"])
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let text = manifest["config"].as_str().unwrap();
    assert!(text.contains("replications = 1\n") && text.contains("seed = 9\n") && text.contains("sim_n = 80\n"));
    assert_eq!(manifest["seed"], 9);
}

/// Randomized data with no average effect on `Y` and independent noise in
/// the two potential outcomes. The 95% interval for the ATE on `Y` targets
/// the sample average effect, so it is checked against the realized one.
#[test]
fn null_effect_interval_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke();
    cfg.sampler.iterations = 400;
    cfg.sampler.burn_in = 200;
    let seeds = 60;
    let mut covered = 0;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut text = String::from("id,A,M,Y,X1,X2\n");
        let mut sate = 0.0;
        let n = 150;
        for i in 0..n {
            let x1: f64 = rng.random();
            let x2: f64 = StandardNormal.sample(&mut rng);
            let a = rng.random_bool(0.5);
            let e: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let m = x1 + if a { 1.0 } else { 0.0 } + 0.3 * e[0];
            let (y0, y1) = (2.0 * x1 + 0.5 * x2 + e[1], 2.0 * x1 + 0.5 * x2 + e[2]);
            sate += (y1 - y0) / n as f64;
            let y = if a { y1 } else { y0 };
            text += &format!("{i},{},{m},{y},{x1},{x2}\n", u8::from(a));
        }
        let path = dir.path().join(format!("null{seed}.csv"));
        write(&path, &text);
        cfg.seed = seed;
        let s = cmd_fit(&cfg, &path, None, &dir.path().join(format!("fit{seed}"))).unwrap();
        if s.ate_y.ci95.0 <= sate && sate <= s.ate_y.ci95.1 {
            covered += 1;
        }
    }
    assert!(10 * covered >= 9 * seeds, "covered {covered} of {seeds}");
}
