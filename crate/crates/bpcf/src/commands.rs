//! The command implementations behind the `bpcf` binary.
//!
//! Every command writes into one output directory and finishes with a
//! `manifest.json` listing the config digest, seed, inputs and the SHA-256
//! of each output file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use bpcf_core::engine::{run, run_bart_pce};
use bpcf_core::estimands::{
    cep_surface, intervals_from_sd_multiples, pce, replication_metrics, surface_grid, Pce,
    StratumInterval,
};
use bpcf_core::propensity::{fit_logistic, predict_propensity};
use bpcf_core::simgen::{gen_scenario1, gen_targeted_selection, scenario1_intervals, SimulatedData, TargetedSelection, SCENARIO1_TRUTHS};
use bpcf_core::special::{mean, quantile_sorted};
use bpcf_core::{BpcfConfig, Dataset, Matrix, ModifierMode, PosteriorDraws};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::data::{fmt, read_dataset, sequential_ids, write_dataset, ColumnRoles};
use crate::error::{Error, Result};
use crate::output::{read_draws, write_draws, write_json, Manifest, Summary, SUMMARY_FILE};

/// Names of the six simulation estimands: the intermediate ATE, then the
/// five interval PCEs.
pub const ESTIMANDS: [&str; 6] = ["ate_m", "pce_1", "pce_2", "pce_3", "pce_4", "pce_5"];

/// Environment variable holding the worker-pool size.
pub const WORKERS_ENV: &str = "BPCF_WORKERS";

const LOGISTIC_TOL: f64 = 1e-10;
const LOGISTIC_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bpcf,
    /// BPCF with the outcome modifier on the potential intermediates alone.
    BpcfMOnly,
    /// Separate BART fits to the intermediate and outcome.
    BartPce,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Bpcf, Method::BpcfMOnly, Method::BartPce];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bpcf => "bpcf",
            Method::BpcfMOnly => "bpcf_m_only",
            Method::BartPce => "bart_pce",
        }
    }

    pub fn parse_list(text: &str) -> Result<Vec<Method>> {
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                Method::ALL
                    .into_iter()
                    .find(|m| m.name() == s)
                    .ok_or_else(|| Error::Usage(format!("unknown method '{s}' (expected bpcf, bpcf_m_only or bart_pce)")))
            })
            .collect()
    }

    pub fn fit(self, data: &Dataset, pihat: &[f64], config: &BpcfConfig, seed: u64) -> Result<PosteriorDraws> {
        Ok(match self {
            Method::Bpcf => run(data, pihat, config, seed)?,
            Method::BpcfMOnly => {
                let cfg = BpcfConfig {
                    modifier_mode: ModifierMode::MOnly,
                    ..*config
                };
                run(data, pihat, &cfg, seed)?
            }
            Method::BartPce => run_bart_pce(data, config, seed)?,
        })
    }
}

/// Logistic propensity fit, clipped to `[clip, 1 − clip]`.
pub fn estimate_propensity(x: &Matrix, treatment: &[bool], clip: f64) -> Result<Vec<f64>> {
    let fit = fit_logistic(x, treatment, LOGISTIC_TOL, LOGISTIC_MAX_ITER)?;
    if !fit.converged {
        log::warn!("propensity fit stopped after {} iterations without converging", fit.iterations);
    }
    Ok(predict_propensity(&fit, x, clip)?)
}

/// Worker count from `BPCF_WORKERS`, else the number of available cores.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Usage(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `stream` within replication `replication`. Stream 0
/// generates the data; stream `k + 1` drives method `k`.
pub fn derive_seed(base: u64, replication: usize, stream: usize) -> u64 {
    mix(mix(mix(base) ^ replication as u64) ^ stream as u64)
}

/// One simulated replication: the six estimates per method, `None` where a
/// stratum was empty in every draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub replication: usize,
    pub data_seed: u64,
    pub estimates: Vec<(Method, [Option<f64>; 6])>,
}

/// Posterior-mean intermediate ATE and the five scenario PCEs.
pub fn scenario1_estimates(draws: &PosteriorDraws) -> Result<[Option<f64>; 6]> {
    let mut out = [None; 6];
    out[0] = Some(mean(&draws.intermediate_effects()));
    for (k, interval) in scenario1_intervals().iter().enumerate() {
        out[k + 1] = pce(draws, interval)?.estimate().map(|e| e.posterior_mean);
    }
    Ok(out)
}

pub fn simulate_replication(cfg: &RunConfig, methods: &[Method], replication: usize) -> Result<ReplicationResult> {
    let data_seed = derive_seed(cfg.seed, replication, 0);
    let sim = gen_scenario1(cfg.sim_n, data_seed)?;
    let pihat = estimate_propensity(&sim.data.x, &sim.data.treatment, cfg.clip)?;
    let mut estimates = Vec::new();
    for (k, &method) in methods.iter().enumerate() {
        let draws = method.fit(&sim.data, &pihat, &cfg.sampler, derive_seed(cfg.seed, replication, k + 1))?;
        estimates.push((method, scenario1_estimates(&draws)?));
    }
    info!("replication {replication} done");
    Ok(ReplicationResult {
        replication,
        data_seed,
        estimates,
    })
}

/// Runs `cfg.replications` replications on a pool of `workers` threads.
/// Results come back in replication order whatever the pool size.
pub fn simulate(cfg: &RunConfig, methods: &[Method], workers: usize) -> Result<Vec<ReplicationResult>> {
    if cfg.replications == 0 {
        return Err(Error::Usage("replications must be at least 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::Usage("no methods selected".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| simulate_replication(cfg, methods, r))
            .collect()
    })
}

/// One row of the summary table: per method, rBias, MSE and the number of
/// replications with a non-empty stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub estimand: &'static str,
    pub truth: f64,
    pub methods: Vec<(Method, Option<f64>, Option<f64>, usize)>,
}

pub fn summarize_replications(results: &[ReplicationResult], methods: &[Method]) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for (k, (&estimand, &truth)) in ESTIMANDS.iter().zip(&SCENARIO1_TRUTHS).enumerate() {
        let mut per_method = Vec::new();
        for &method in methods {
            let values: Vec<f64> = results
                .iter()
                .flat_map(|r| r.estimates.iter().filter(|(m, _)| *m == method).filter_map(|(_, e)| e[k]))
                .collect();
            if values.is_empty() {
                per_method.push((method, None, None, 0));
            } else {
                let m = replication_metrics(&values, truth)?;
                per_method.push((method, m.rbias, Some(m.mse), values.len()));
            }
        }
        rows.push(TableRow {
            estimand,
            truth,
            methods: per_method,
        });
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), fmt)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(Error::csv(path))
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(Error::csv(path))?;
    for row in rows {
        w.write_record(row).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))
}

fn strings<const N: usize>(items: [&str; N]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// `simulate`: writes `table1.csv` (one row per estimand; columns
/// `estimand,truth` then `<method>_rbias,<method>_mse,<method>_n`) and
/// `replications.csv` (`replication,data_seed,method,estimand,truth,estimate`).
pub fn cmd_simulate(cfg: &RunConfig, methods: &[Method], out: &Path) -> Result<Vec<TableRow>> {
    create_dir(out)?;
    let workers = worker_count()?;
    info!("simulate: {} replications of n = {} on {workers} workers", cfg.replications, cfg.sim_n);
    let results = simulate(cfg, methods, workers)?;
    let table = summarize_replications(&results, methods)?;

    let mut header = strings(["estimand", "truth"]);
    for m in methods {
        for stat in ["rbias", "mse", "n"] {
            header.push(format!("{}_{stat}", m.name()));
        }
    }
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|row| {
            let mut rec = vec![row.estimand.to_string(), fmt(row.truth)];
            for &(_, rbias, mse, n) in &row.methods {
                rec.extend([opt(rbias), opt(mse), n.to_string()]);
            }
            rec
        })
        .collect();
    write_rows(&out.join("table1.csv"), &header, &rows)?;

    let mut long = Vec::new();
    for r in &results {
        for (method, est) in &r.estimates {
            for (k, e) in est.iter().enumerate() {
                long.push(vec![
                    r.replication.to_string(),
                    r.data_seed.to_string(),
                    method.name().to_string(),
                    ESTIMANDS[k].to_string(),
                    fmt(SCENARIO1_TRUTHS[k]),
                    opt(*e),
                ]);
            }
        }
    }
    let header = strings(["replication", "data_seed", "method", "estimand", "truth", "estimate"]);
    write_rows(&out.join("replications.csv"), &header, &long)?;

    let mut manifest = Manifest::new("simulate", cfg.seed, cfg.to_text());
    let names: Vec<&str> = methods.iter().map(|m| m.name()).collect();
    manifest.parameters.insert("methods".into(), names.join(","));
    manifest.write(out, &["table1.csv".into(), "replications.csv".into()])?;
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
struct LoglikSummary {
    kept_mean: f64,
    kept_min: f64,
    kept_max: f64,
    /// Mean over the first and second halves of the kept draws.
    first_half_mean: f64,
    second_half_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Diagnostics {
    /// Correlation of the estimated propensity with the posterior-mean
    /// outcome prognostic function.
    pearson_pihat_mu_y: f64,
    spearman_pihat_mu_y: f64,
    pearson_pihat_mu_m: f64,
    spearman_pihat_mu_m: f64,
    loglik: LoglikSummary,
    sigma_m_median: f64,
    sigma_y_median: f64,
    m_mis_acceptance: f64,
    forest_acceptance: BTreeMap<String, f64>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

fn diagnostics(draws: &PosteriorDraws, pihat: &[f64]) -> Diagnostics {
    use bpcf_core::diagnostics::{pearson, spearman};
    let half = draws.loglik.len() / 2;
    let ll = &draws.loglik;
    Diagnostics {
        pearson_pihat_mu_y: pearson(pihat, &draws.prognostic_y),
        spearman_pihat_mu_y: spearman(pihat, &draws.prognostic_y),
        pearson_pihat_mu_m: pearson(pihat, &draws.prognostic_m),
        spearman_pihat_mu_m: spearman(pihat, &draws.prognostic_m),
        loglik: LoglikSummary {
            kept_mean: mean(ll),
            kept_min: ll.iter().copied().fold(f64::INFINITY, f64::min),
            kept_max: ll.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            first_half_mean: mean(&ll[..half]),
            second_half_mean: mean(&ll[half..]),
        },
        sigma_m_median: median(&draws.sigma_m),
        sigma_y_median: median(&draws.sigma_y),
        m_mis_acceptance: draws.acceptance.m_mis.rate(),
        forest_acceptance: draws
            .acceptance
            .forests
            .iter()
            .map(|(name, s)| (name.clone(), s.total().rate()))
            .collect(),
    }
}

/// `fit`: logistic propensity, then the joint sampler. Writes the draws
/// directory plus `propensity.csv` (`id,pihat`), `prognostic.csv`
/// (`id,A,pihat,mu_m,mu_y`, posterior-mean prognostic functions in
/// original units) and `diagnostics.json`.
pub fn cmd_fit(cfg: &RunConfig, data_path: &Path, roles_path: Option<&Path>, out: &Path) -> Result<Summary> {
    let roles = match roles_path {
        Some(p) => ColumnRoles::load(p)?,
        None => ColumnRoles::default(),
    };
    let loaded = read_dataset(data_path, &roles)?;
    create_dir(out)?;
    let data = &loaded.data;
    info!("fit: {} units, {} covariates", data.n(), data.x.cols());
    let pihat = estimate_propensity(&loaded.propensity_x, &data.treatment, cfg.clip)?;
    let sampler = BpcfConfig {
        keep_modifier_forests: true,
        ..cfg.sampler
    };
    let draws = run(data, &pihat, &sampler, cfg.seed)?;

    let mut files = write_draws(out, &loaded.ids, &draws)?;
    let summary = Summary::new(Method::Bpcf.name(), &draws);
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    files.push(SUMMARY_FILE.into());

    let rows: Vec<Vec<String>> = loaded.ids.iter().zip(&pihat).map(|(id, p)| vec![id.clone(), fmt(*p)]).collect();
    write_rows(&out.join("propensity.csv"), &strings(["id", "pihat"]), &rows)?;
    files.push("propensity.csv".into());

    let rows: Vec<Vec<String>> = (0..data.n())
        .map(|i| {
            vec![
                loaded.ids[i].clone(),
                u8::from(data.treatment[i]).to_string(),
                fmt(pihat[i]),
                fmt(draws.prognostic_m[i]),
                fmt(draws.prognostic_y[i]),
            ]
        })
        .collect();
    write_rows(&out.join("prognostic.csv"), &strings(["id", "A", "pihat", "mu_m", "mu_y"]), &rows)?;
    files.push("prognostic.csv".into());

    write_json(&out.join("diagnostics.json"), &diagnostics(&draws, &pihat))?;
    files.push("diagnostics.json".into());

    let mut manifest = Manifest::new("fit", cfg.seed, cfg.to_text());
    manifest.add_input(data_path)?;
    if let Some(p) = roles_path {
        manifest.add_input(p)?;
    }
    manifest.write(out, &files)?;
    info!(
        "fit: ATE on M {:.4} {:?}, ATE on Y {:.4} {:?}",
        summary.ate_m.posterior_mean, summary.ate_m.ci95, summary.ate_y.posterior_mean, summary.ate_y.ci95
    );
    Ok(summary)
}

/// How the strata for `pce` are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum StrataSpec {
    Explicit(Vec<StratumInterval>),
    /// Multiples of the SD of the posterior-mean unit effects on `M`.
    SdMultiples(Vec<f64>),
}

fn parse_bound(s: &str) -> Result<f64> {
    match s.trim() {
        "-inf" => Ok(f64::NEG_INFINITY),
        "inf" | "+inf" => Ok(f64::INFINITY),
        t => t.parse().map_err(|_| Error::Usage(format!("bad interval bound '{t}'"))),
    }
}

/// Parses `lo:hi,lo:hi,...` (bounds may be `-inf` / `inf`) into open
/// intervals.
pub fn parse_intervals(text: &str) -> Result<Vec<StratumInterval>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (lo, hi) = item
                .split_once(':')
                .ok_or_else(|| Error::Usage(format!("interval '{item}' is not of the form lo:hi")))?;
            Ok(StratumInterval::open(parse_bound(lo)?, parse_bound(hi)?)?)
        })
        .collect()
}

pub fn parse_numbers(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| Error::Usage(format!("'{s}' is not a number"))))
        .collect()
}

/// A row of `pce.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct PceRow {
    pub interval: StratumInterval,
    pub result: Pce,
}

/// Stratum PCEs for `draws`. With SD multiples the SD unit is returned too.
pub fn pce_table(draws: &PosteriorDraws, spec: &StrataSpec) -> Result<(Option<f64>, Vec<PceRow>)> {
    let (unit, intervals) = match spec {
        StrataSpec::Explicit(v) => (None, v.clone()),
        StrataSpec::SdMultiples(m) => {
            let (s, v) = intervals_from_sd_multiples(draws, m)?;
            (Some(s), v)
        }
    };
    if intervals.is_empty() {
        return Err(Error::Usage("no strata given".into()));
    }
    let rows = intervals
        .into_iter()
        .map(|interval| Ok(PceRow { interval, result: pce(draws, &interval)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok((unit, rows))
}

/// `pce`: writes `pce.csv` with header
/// `stratum,lower,upper,lower_closed,status,posterior_mean,posterior_sd,ci_lower,ci_upper,avg_stratum_n,nonempty_draws`.
/// `status` is `ok` or `empty_stratum`; an empty stratum has `NA` estimates.
pub fn cmd_pce(cfg: &RunConfig, draws_dir: &Path, spec: &StrataSpec, out: &Path) -> Result<Vec<PceRow>> {
    let (_, draws) = read_draws(draws_dir)?;
    let (unit, rows) = pce_table(&draws, spec)?;
    create_dir(out)?;
    let header = strings([
        "stratum",
        "lower",
        "upper",
        "lower_closed",
        "status",
        "posterior_mean",
        "posterior_sd",
        "ci_lower",
        "ci_upper",
        "avg_stratum_n",
        "nonempty_draws",
    ]);
    let text: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut rec = vec![
                (k + 1).to_string(),
                fmt(r.interval.lower),
                fmt(r.interval.upper),
                r.interval.lower_closed.to_string(),
            ];
            match &r.result {
                Pce::Estimate(e) => rec.extend([
                    "ok".into(),
                    fmt(e.posterior_mean),
                    fmt(e.posterior_sd),
                    fmt(e.ci95.0),
                    fmt(e.ci95.1),
                    fmt(e.avg_stratum_n),
                    e.nonempty_draws.to_string(),
                ]),
                Pce::EmptyStratum => {
                    log::warn!("stratum {} is empty in every draw", k + 1);
                    rec.extend(["empty_stratum", "NA", "NA", "NA", "NA", "0", "0"].map(String::from));
                }
            }
            rec
        })
        .collect();
    write_rows(&out.join("pce.csv"), &header, &text)?;

    let mut manifest = Manifest::new("pce", cfg.seed, cfg.to_text());
    add_draws_inputs(&mut manifest, draws_dir)?;
    match spec {
        StrataSpec::Explicit(_) => {
            manifest.parameters.insert("strata".into(), "explicit".into());
        }
        StrataSpec::SdMultiples(m) => {
            let list: Vec<String> = m.iter().map(|v| fmt(*v)).collect();
            manifest.parameters.insert("sd_multiples".into(), list.join(","));
            manifest.parameters.insert("sd_unit".into(), opt(unit));
        }
    }
    manifest.write(out, &["pce.csv".into()])?;
    Ok(rows)
}

fn add_draws_inputs(manifest: &mut Manifest, dir: &Path) -> Result<()> {
    for name in crate::output::DRAW_FILES.iter().chain([&crate::output::MODIFIER_FILE]) {
        let p = dir.join(name);
        if p.exists() {
            manifest.add_input(&p)?;
        }
    }
    Ok(())
}

/// `surface`: writes `surface.csv` (`m0,m1,effect`, one row per grid cell,
/// `m0` varying slowest) and `points.csv` (`id,m0,m1`, the posterior-mean
/// potential intermediates of each unit).
pub fn cmd_surface(cfg: &RunConfig, draws_dir: &Path, size: usize, out: &Path) -> Result<usize> {
    let (ids, draws) = read_draws(draws_dir)?;
    let (g0, g1) = surface_grid(&draws, size)?;
    let surface = cep_surface(&draws, &g0, &g1)?;
    create_dir(out)?;
    let mut rows = Vec::new();
    for (j, &m0) in surface.grid_m0.iter().enumerate() {
        for (k, &m1) in surface.grid_m1.iter().enumerate() {
            rows.push(vec![fmt(m0), fmt(m1), fmt(surface.values[j][k])]);
        }
    }
    write_rows(&out.join("surface.csv"), &strings(["m0", "m1", "effect"]), &rows)?;
    let points: Vec<Vec<String>> = ids
        .iter()
        .zip(&surface.points)
        .map(|(id, (m0, m1))| vec![id.clone(), fmt(*m0), fmt(*m1)])
        .collect();
    write_rows(&out.join("points.csv"), &strings(["id", "m0", "m1"]), &points)?;

    let mut manifest = Manifest::new("surface", cfg.seed, cfg.to_text());
    add_draws_inputs(&mut manifest, draws_dir)?;
    manifest.parameters.insert("grid".into(), size.to_string());
    manifest.write(out, &["surface.csv".into(), "points.csv".into()])?;
    Ok(rows.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Scenario1,
    Targeted,
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "scenario1" => Ok(Scenario::Scenario1),
            "targeted" => Ok(Scenario::Targeted),
            _ => Err(format!("unknown scenario '{s}' (expected scenario1 or targeted)")),
        }
    }
}

/// `generate`: writes `data.csv` in the default role layout and
/// `truth.csv` (`id,M0,M1,Y0,Y1,propensity`).
pub fn cmd_generate(cfg: &RunConfig, scenario: Scenario, n: usize, out: &Path) -> Result<SimulatedData> {
    let sim = match scenario {
        Scenario::Scenario1 => gen_scenario1(n, cfg.seed)?,
        Scenario::Targeted => gen_targeted_selection(n, &TargetedSelection::default(), cfg.seed)?,
    };
    sim.data.validate()?;
    create_dir(out)?;
    let ids = sequential_ids(n);
    write_dataset(&out.join("data.csv"), &ids, &sim.data)?;
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            vec![
                ids[i].clone(),
                fmt(sim.m0[i]),
                fmt(sim.m1[i]),
                fmt(sim.y0[i]),
                fmt(sim.y1[i]),
                fmt(sim.propensity[i]),
            ]
        })
        .collect();
    write_rows(&out.join("truth.csv"), &strings(["id", "M0", "M1", "Y0", "Y1", "propensity"]), &rows)?;

    let mut manifest = Manifest::new("generate", cfg.seed, cfg.to_text());
    let name = match scenario {
        Scenario::Scenario1 => "scenario1",
        Scenario::Targeted => "targeted",
    };
    manifest.parameters.insert("scenario".into(), name.into());
    manifest.parameters.insert("n".into(), n.to_string());
    manifest.write(out, &["data.csv".into(), "truth.csv".into()])?;
    Ok(sim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_across_streams_and_replications() {
        let a = derive_seed(1, 0, 0);
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(2, 0, 0));
        assert_eq!(a, derive_seed(1, 0, 0));
    }

    #[test]
    fn interval_text() {
        let v = parse_intervals("-inf:inf, 0:1.5").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0], StratumInterval::whole_line());
        assert_eq!((v[1].lower, v[1].upper), (0.0, 1.5));
        assert!(parse_intervals("2:1").is_err());
        assert!(parse_intervals("2").is_err());
        assert_eq!(parse_numbers("0.2, 0.5").unwrap(), vec![0.2, 0.5]);
    }

    #[test]
    fn method_names() {
        assert_eq!(Method::parse_list("bpcf,bart_pce").unwrap(), vec![Method::Bpcf, Method::BartPce]);
        assert!(Method::parse_list("dp_pce").is_err());
    }
}
