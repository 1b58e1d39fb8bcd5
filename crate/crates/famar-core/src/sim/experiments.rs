//! The Monte-Carlo experiments: loading normality and the setting sweeps.

use rayon::prelude::*;

use crate::error::{FamarError, Result};
use crate::kernels::{unvectorize, vectorize};
use crate::mfm::{self, UMode};
use crate::panel::{DenseMatrix, MatrixPanel, Vector};
use crate::sim::config::SimConfig;
use crate::sim::generate::{
    generate, normal_matrix, stream_rng, GeneratedData, OracleRotation, SHARED_STREAM,
};
use crate::solver::{
    self, cross_validate, FitMethod, RegressionData, SolverConfig,
};
use crate::stats;

/// Per-entry outcome of the loading normality experiment.
#[derive(Debug, Clone)]
pub struct EntryNormality {
    pub row: usize,
    pub col: usize,
    /// KS statistic of the studentized replication sequence against N(0, 1).
    pub ks: f64,
    pub pass: bool,
    /// Mean of the studentized sequence.
    pub standardized_mean: f64,
    /// Sample sd of the raw scaled errors.
    pub sd: f64,
}

#[derive(Debug, Clone)]
pub struct NormalityResult {
    pub replications: usize,
    pub ks_level: f64,
    pub ks_critical: f64,
    pub entries_r: Vec<EntryNormality>,
    pub entries_c: Vec<EntryNormality>,
    pub pass_rate_r: f64,
    pub pass_rate_c: f64,
}

/// Loading normality experiment.
///
/// The loadings, the pre-training split, and hence the projections are drawn
/// once from the shared stream and held fixed; each replication redraws the
/// estimation-split factors and idiosyncratics from its own stream. Per
/// replication the scaled errors `sqrt(n p2 k2) (R_hat - c_s_ring R_ring)`
/// and `sqrt(n p1 k1) (C_hat - r_s_ring C_ring)` are recorded entrywise; each
/// entry sequence is studentized by its sample sd and tested against the
/// standard normal with a one-sample KS test at `ks_level`.
pub fn normality_experiment(config: &SimConfig, ks_level: f64) -> Result<NormalityResult> {
    config.validate()?;
    if config.replications < 100 {
        return Err(FamarError::InvalidConfig(
            "normality experiment needs at least 100 replications".into(),
        ));
    }
    let c = config;

    // fixed design: loadings and the pre-training split
    let mut shared = stream_rng(c.seed, SHARED_STREAM);
    let r_star = normal_matrix(&mut shared, c.p1, c.k1, c.loading_dist.0, c.loading_dist.1);
    let c_star = normal_matrix(&mut shared, c.p2, c.k2, c.loading_dist.0, c.loading_dist.1);
    let pretrain = {
        let mut mats = Vec::with_capacity(c.n_pretrain);
        for _ in 0..c.n_pretrain {
            let f = normal_matrix(&mut shared, c.k1, c.k2, 0.0, c.factor_sd);
            let u = normal_matrix(&mut shared, c.p1, c.p2, 0.0, c.idio_sd);
            mats.push(&r_star * f * c_star.transpose() + u);
        }
        MatrixPanel::from_parts_unchecked(c.p1, c.p2, mats)
    };
    let proj = mfm::pretrain_projections(&pretrain, c.k1, c.k2)?;
    let oracle = OracleRotation::from_truth(&proj, &r_star, &c_star)?;
    let r_target = &oracle.r_ring * oracle.c_s_ring;
    let c_target = &oracle.c_ring * oracle.r_s_ring;
    let scale_r = ((c.n * c.p2 * c.k2) as f64).sqrt();
    let scale_c = ((c.n * c.p1 * c.k1) as f64).sqrt();

    let per_rep: Vec<(Vector, Vector)> = (0..c.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(c.seed, rep);
            let mut mats = Vec::with_capacity(c.n);
            for _ in 0..c.n {
                let f = normal_matrix(&mut rng, c.k1, c.k2, 0.0, c.factor_sd);
                let u = normal_matrix(&mut rng, c.p1, c.p2, 0.0, c.idio_sd);
                mats.push(&r_star * f * c_star.transpose() + u);
            }
            let panel = MatrixPanel::from_parts_unchecked(c.p1, c.p2, mats);
            let f_hat = mfm::project_factors(&panel, &proj).expect("shapes agree");
            let gamma = mfm::ols_loading(&panel, &f_hat).expect("well-posed OLS");
            let avg = mfm::block_average(&gamma, c.p1, c.p2, c.k1, c.k2).expect("shapes agree");
            let err_r = vectorize(&((avg.r_hat - &r_target) * scale_r));
            let err_c = vectorize(&((avg.c_hat - &c_target) * scale_c));
            (err_r, err_c)
        })
        .collect();

    let summarize = |select: &dyn Fn(&(Vector, Vector)) -> &Vector,
                     rows: usize,
                     critical: f64|
     -> Result<Vec<EntryNormality>> {
        let entries = select(&per_rep[0]).len();
        let mut out = Vec::with_capacity(entries);
        for e in 0..entries {
            let seq: Vec<f64> = per_rep.iter().map(|pair| select(pair)[e]).collect();
            let sd = stats::sample_sd(&seq);
            if sd == 0.0 {
                return Err(FamarError::InvalidConfig(
                    "degenerate replication sequence: zero variance".into(),
                ));
            }
            let standardized: Vec<f64> = seq.iter().map(|v| v / sd).collect();
            let ks = stats::ks_statistic_normal(&standardized);
            out.push(EntryNormality {
                row: e % rows,
                col: e / rows,
                ks,
                pass: ks < critical,
                standardized_mean: stats::mean(&standardized),
                sd,
            });
        }
        Ok(out)
    };

    let critical = stats::ks_critical_value(ks_level, c.replications);
    let entries_r = summarize(&|pair| &pair.0, c.p1, critical)?;
    let entries_c = summarize(&|pair| &pair.1, c.p2, critical)?;
    let rate = |entries: &[EntryNormality]| {
        entries.iter().filter(|e| e.pass).count() as f64 / entries.len() as f64
    };
    Ok(NormalityResult {
        replications: c.replications,
        ks_level,
        ks_critical: critical,
        pass_rate_r: rate(&entries_r),
        pass_rate_c: rate(&entries_c),
        entries_r,
        entries_c,
    })
}

/// Regression benchmarks compared in the setting sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegMethod {
    /// True factors and idiosyncratics as covariates.
    Oracle,
    /// Estimated factors and idiosyncratics.
    Famar,
    /// The observed covariate matrices themselves.
    BaselineX,
}

impl RegMethod {
    pub fn label(&self) -> &'static str {
        match self {
            RegMethod::Oracle => "oracle",
            RegMethod::Famar => "famar",
            RegMethod::BaselineX => "baseline_x",
        }
    }
}

/// Controls for [`run_setting`]. The defaults mirror the experiment recipes
/// at desk scale: nuclear path, cross-validated penalty on a short log grid,
/// and no demeaning (the generative law is mean zero).
#[derive(Debug, Clone)]
pub struct RunSettingOptions {
    pub with_regression: bool,
    pub methods: Vec<RegMethod>,
    pub folds: usize,
    pub lambda_points: usize,
    pub lambda_min_frac: f64,
    /// Solver tolerance and iteration cap for cross-validation fold fits.
    pub cv_epsilon: f64,
    pub cv_max_iter: usize,
    /// Solver tolerance and iteration cap for the final refit.
    pub final_epsilon: f64,
    pub final_max_iter: usize,
    pub u_mode: UMode,
    pub demean: bool,
}

impl Default for RunSettingOptions {
    fn default() -> Self {
        Self {
            with_regression: true,
            methods: vec![RegMethod::Oracle, RegMethod::Famar, RegMethod::BaselineX],
            folds: 2,
            lambda_points: 6,
            lambda_min_frac: 1e-2,
            cv_epsilon: 1e-3,
            cv_max_iter: 500,
            final_epsilon: 1e-4,
            final_max_iter: 1500,
            u_mode: UMode::Kronecker,
            demean: false,
        }
    }
}

impl RunSettingOptions {
    /// Factor and idiosyncratic estimation metrics only.
    pub fn estimation_only() -> Self {
        Self { with_regression: false, methods: vec![], ..Self::default() }
    }
}

/// One emitted row: either MFM estimation metrics (`method = "mfm"`) or
/// regression metrics for one benchmark.
#[derive(Debug, Clone)]
pub struct RepRecord {
    pub setting: String,
    pub grid_label: String,
    pub method: String,
    pub replication: usize,
    pub rel_err_f: Option<f64>,
    pub rel_err_u_avg: Option<f64>,
    pub rel_err_u_noavg: Option<f64>,
    pub rel_err_a: Option<f64>,
    pub rel_err_b: Option<f64>,
    pub rel_err_y_new: Option<f64>,
    pub rank_b_hat: Option<usize>,
    pub lambda_star: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
}

/// Aggregate of one metric over replications.
#[derive(Debug, Clone)]
pub struct AggRecord {
    pub setting: String,
    pub grid_label: String,
    pub method: String,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

#[derive(Debug, Clone)]
pub struct SimResultTable {
    pub records: Vec<RepRecord>,
    pub aggregates: Vec<AggRecord>,
}

impl SimResultTable {
    /// Median of a metric at one `(grid_label, method)` cell.
    pub fn median_of(&self, grid_label: &str, method: &str, metric: &str) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.grid_label == grid_label && a.method == method && a.metric == metric)
            .map(|a| a.median)
    }
}

struct MfmOutcome {
    rel_err_f: f64,
    rel_err_u_avg: f64,
    rel_err_u_noavg: f64,
    f_hat: MatrixPanel,
    u_avg: MatrixPanel,
    u_noavg: MatrixPanel,
    proj: mfm::ProjectionPair,
    gamma: DenseMatrix,
    r_hat: DenseMatrix,
    c_hat: DenseMatrix,
    avg_scale: f64,
    oracle: OracleRotation,
}

fn run_mfm(config: &SimConfig, data: &GeneratedData) -> Result<MfmOutcome> {
    let proj = mfm::pretrain_projections(&data.pretrain, config.k1, config.k2)?;
    let f_hat = mfm::project_factors(&data.panel, &proj)?;
    let gamma = mfm::ols_loading(&data.panel, &f_hat)?;
    let avg = mfm::block_average(&gamma, config.p1, config.p2, config.k1, config.k2)?;
    let avg_scale = 0.5 * (avg.c_s + avg.r_s);
    if (avg.c_s * avg.r_s).abs() <= 1e-10 || avg_scale.abs() <= 1e-10 {
        return Err(FamarError::DegenerateScale((avg.c_s * avg.r_s).abs()));
    }

    let oracle = OracleRotation::from_truth(&proj, &data.truth.r_star, &data.truth.c_star)?;
    let f_target = oracle.rotate_factors(&data.truth.f);
    let rel_err_f = f_hat.frob_distance(&f_target) / f_target.frob_norm();

    let ct = avg.c_hat.transpose();
    let u_avg = MatrixPanel::from_parts_unchecked(
        config.p1,
        config.p2,
        data.panel
            .iter()
            .zip(f_hat.iter())
            .map(|(x, f)| x - (&avg.r_hat * f * &ct) / avg_scale)
            .collect(),
    );
    let u_noavg = MatrixPanel::from_parts_unchecked(
        config.p1,
        config.p2,
        data.panel
            .iter()
            .zip(f_hat.iter())
            .map(|(x, f)| {
                let common: Vector = &gamma * vectorize(f);
                x - unvectorize(&common, config.p1, config.p2)
            })
            .collect(),
    );
    let u_norm = data.truth.u.frob_norm();
    let rel_err_u_avg = u_avg.frob_distance(&data.truth.u) / u_norm;
    let rel_err_u_noavg = u_noavg.frob_distance(&data.truth.u) / u_norm;

    Ok(MfmOutcome {
        rel_err_f,
        rel_err_u_avg,
        rel_err_u_noavg,
        f_hat,
        u_avg,
        u_noavg,
        proj,
        gamma,
        r_hat: avg.r_hat,
        c_hat: avg.c_hat,
        avg_scale,
        oracle,
    })
}

struct RegressionOutcome {
    rel_err_a: Option<f64>,
    rel_err_b: f64,
    rel_err_y_new: Option<f64>,
    rank_b: usize,
    lambda_star: f64,
    iterations: usize,
    converged: bool,
}

fn fit_and_score(
    train: &RegressionData,
    new_cov: Option<(&MatrixPanel, &MatrixPanel)>,
    y_new: Option<&Vector>,
    truth_a: Option<&DenseMatrix>,
    truth_b: &DenseMatrix,
    rotation: Option<&OracleRotation>,
    opts: &RunSettingOptions,
    cv_seed: u64,
) -> Result<RegressionOutcome> {
    let lambda_max = solver::nuclear_null_threshold(train)?;
    let grid = solver::log_lambda_grid(lambda_max, opts.lambda_points, opts.lambda_min_frac);
    let cv_config = SolverConfig {
        epsilon: opts.cv_epsilon,
        max_iter: opts.cv_max_iter,
        ..SolverConfig::default()
    };
    let cv = cross_validate(train, FitMethod::Nuclear, &grid, opts.folds, cv_seed, &cv_config)?;
    let final_config = SolverConfig {
        lambda: cv.lambda_star,
        epsilon: opts.final_epsilon,
        max_iter: opts.final_max_iter,
        ..SolverConfig::default()
    };
    let fit = solver::apgd_nuclear(train, &final_config)?;

    let rel_err_a = truth_a.map(|a_star| {
        let adjusted = match rotation {
            Some(orc) => orc.h1.transpose() * &fit.a_hat * &orc.h2,
            None => fit.a_hat.clone(),
        };
        (adjusted - a_star).norm() / a_star.norm()
    });
    let rel_err_b = (&fit.b_hat - truth_b).norm() / truth_b.norm();
    let rel_err_y_new = match (new_cov, y_new) {
        (Some((f_new, u_new)), Some(y_new)) => {
            let preds = solver::predict(&fit, f_new, u_new)?;
            Some((&preds - y_new).norm() / y_new.norm())
        }
        _ => None,
    };
    Ok(RegressionOutcome {
        rel_err_a,
        rel_err_b,
        rel_err_y_new,
        rank_b: fit.rank_b,
        lambda_star: cv.lambda_star,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

fn empty_panel_like(n: usize) -> MatrixPanel {
    MatrixPanel::from_parts_unchecked(0, 0, vec![DenseMatrix::zeros(0, 0); n])
}

/// Runs one configuration for every replication and method, producing one
/// record per `(replication, method)` plus the `"mfm"` estimation rows.
fn run_point(
    setting: &str,
    label: &str,
    config: &SimConfig,
    opts: &RunSettingOptions,
) -> Result<Vec<RepRecord>> {
    config.validate()?;
    let results: Vec<Result<Vec<RepRecord>>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| -> Result<Vec<RepRecord>> {
            let data = generate(config, rep as u64)?;
            let mfm_out = run_mfm(config, &data)?;
            let mut rows = Vec::new();
            rows.push(RepRecord {
                setting: setting.to_string(),
                grid_label: label.to_string(),
                method: "mfm".into(),
                replication: rep,
                rel_err_f: Some(mfm_out.rel_err_f),
                rel_err_u_avg: Some(mfm_out.rel_err_u_avg),
                rel_err_u_noavg: Some(mfm_out.rel_err_u_noavg),
                rel_err_a: None,
                rel_err_b: None,
                rel_err_y_new: None,
                rank_b_hat: None,
                lambda_star: None,
                iterations: None,
                converged: None,
            });
            if opts.with_regression {
                for method in &opts.methods {
                    let reg = score_method(*method, config, &data, &mfm_out, opts, rep as u64)?;
                    rows.push(RepRecord {
                        setting: setting.to_string(),
                        grid_label: label.to_string(),
                        method: method.label().into(),
                        replication: rep,
                        rel_err_f: None,
                        rel_err_u_avg: None,
                        rel_err_u_noavg: None,
                        rel_err_a: reg.rel_err_a,
                        rel_err_b: Some(reg.rel_err_b),
                        rel_err_y_new: reg.rel_err_y_new,
                        rank_b_hat: Some(reg.rank_b),
                        lambda_star: Some(reg.lambda_star),
                        iterations: Some(reg.iterations),
                        converged: Some(reg.converged),
                    });
                }
            }
            Ok(rows)
        })
        .collect();
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    Ok(records)
}

fn score_method(
    method: RegMethod,
    config: &SimConfig,
    data: &GeneratedData,
    mfm_out: &MfmOutcome,
    opts: &RunSettingOptions,
    rep: u64,
) -> Result<RegressionOutcome> {
    let truth = &data.truth;
    let cv_seed = config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(rep);
    match method {
        RegMethod::Oracle => {
            let train =
                RegressionData::new(data.y.clone(), truth.f.clone(), truth.u.clone())?;
            let new_cov = truth
                .f_new
                .as_ref()
                .zip(truth.u_new.as_ref());
            fit_and_score(
                &train,
                new_cov,
                data.y_new.as_ref(),
                Some(&truth.a_star),
                &truth.b_star,
                None,
                opts,
                cv_seed,
            )
        }
        RegMethod::Famar => {
            let u_panel = match opts.u_mode {
                UMode::Kronecker => mfm_out.u_avg.clone(),
                UMode::Projection => mfm_out.u_noavg.clone(),
            };
            let train = RegressionData::new(data.y.clone(), mfm_out.f_hat.clone(), u_panel)?;
            let new_pair = match &data.new_panel {
                Some(x_new) => {
                    let f_new = mfm::project_factors(x_new, &mfm_out.proj)?;
                    let u_new = match opts.u_mode {
                        UMode::Kronecker => {
                            let ct = mfm_out.c_hat.transpose();
                            MatrixPanel::from_parts_unchecked(
                                config.p1,
                                config.p2,
                                x_new
                                    .iter()
                                    .zip(f_new.iter())
                                    .map(|(x, f)| {
                                        x - (&mfm_out.r_hat * f * &ct) / mfm_out.avg_scale
                                    })
                                    .collect(),
                            )
                        }
                        UMode::Projection => MatrixPanel::from_parts_unchecked(
                            config.p1,
                            config.p2,
                            x_new
                                .iter()
                                .zip(f_new.iter())
                                .map(|(x, f)| {
                                    let common: Vector = &mfm_out.gamma * vectorize(f);
                                    x - unvectorize(&common, config.p1, config.p2)
                                })
                                .collect(),
                        ),
                    };
                    Some((f_new, u_new))
                }
                None => None,
            };
            fit_and_score(
                &train,
                new_pair.as_ref().map(|(f, u)| (f, u)),
                data.y_new.as_ref(),
                Some(&truth.a_star),
                &truth.b_star,
                Some(&mfm_out.oracle),
                opts,
                cv_seed,
            )
        }
        RegMethod::BaselineX => {
            let train = RegressionData::without_factors(data.y.clone(), data.panel.clone())?;
            let empty_new = data.new_panel.as_ref().map(|x| (empty_panel_like(x.len()), x.clone()));
            fit_and_score(
                &train,
                empty_new.as_ref().map(|(f, u)| (f, u)),
                data.y_new.as_ref(),
                None,
                &truth.b_star,
                None,
                opts,
                cv_seed,
            )
        }
    }
}

fn aggregate(records: &[RepRecord]) -> Vec<AggRecord> {
    use std::collections::BTreeMap;
    type Key = (String, String, String, String);
    let mut groups: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    let metrics: [(&str, fn(&RepRecord) -> Option<f64>); 8] = [
        ("rel_err_f", |r| r.rel_err_f),
        ("rel_err_u_avg", |r| r.rel_err_u_avg),
        ("rel_err_u_noavg", |r| r.rel_err_u_noavg),
        ("rel_err_a", |r| r.rel_err_a),
        ("rel_err_b", |r| r.rel_err_b),
        ("rel_err_y_new", |r| r.rel_err_y_new),
        ("rank_b_hat", |r| r.rank_b_hat.map(|v| v as f64)),
        ("lambda_star", |r| r.lambda_star),
    ];
    for record in records {
        for (name, get) in &metrics {
            if let Some(v) = get(record) {
                groups
                    .entry((
                        record.setting.clone(),
                        record.grid_label.clone(),
                        record.method.clone(),
                        name.to_string(),
                    ))
                    .or_default()
                    .push(v);
            }
        }
    }
    groups
        .into_iter()
        .map(|((setting, grid_label, method, metric), values)| AggRecord {
            setting,
            grid_label,
            method,
            metric,
            count: values.len(),
            mean: stats::mean(&values),
            sd: if values.len() >= 2 { stats::sample_sd(&values) } else { 0.0 },
            q25: stats::quantile(&values, 0.25),
            median: stats::median(&values),
            q75: stats::quantile(&values, 0.75),
        })
        .collect()
}

/// Runs a grid of configurations, one point at a time, replications in
/// parallel with a fixed aggregation order.
pub fn run_setting(
    setting_name: &str,
    grid: &[(String, SimConfig)],
    opts: &RunSettingOptions,
) -> Result<SimResultTable> {
    if grid.is_empty() {
        return Err(FamarError::InvalidConfig("setting grid is empty".into()));
    }
    let mut records = Vec::new();
    for (label, config) in grid {
        records.extend(run_point(setting_name, label, config, opts)?);
    }
    let aggregates = aggregate(&records);
    Ok(SimResultTable { records, aggregates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::AMode;

    fn tiny_config() -> SimConfig {
        SimConfig {
            n: 60,
            n_pretrain: 40,
            n_new: 30,
            p1: 8,
            p2: 6,
            k1: 2,
            k2: 2,
            rank_b: 2,
            seed: 11,
            replications: 3,
            a_mode: AMode::ScaledRtbc { scale: 0.5 },
            ..SimConfig::experiment_base()
        }
    }

    #[test]
    fn run_setting_produces_rows_for_every_method() {
        let config = tiny_config();
        let grid = vec![("p=8".to_string(), config)];
        let opts = RunSettingOptions {
            folds: 2,
            lambda_points: 3,
            ..RunSettingOptions::default()
        };
        let table = run_setting("tiny", &grid, &opts).unwrap();
        let mfm_rows = table.records.iter().filter(|r| r.method == "mfm").count();
        assert_eq!(mfm_rows, 3);
        for method in ["oracle", "famar", "baseline_x"] {
            assert_eq!(
                table.records.iter().filter(|r| r.method == method).count(),
                3,
                "{method}"
            );
        }
        assert!(table.median_of("p=8", "mfm", "rel_err_f").unwrap() > 0.0);
        for method in ["oracle", "famar", "baseline_x"] {
            let b_err = table.median_of("p=8", method, "rel_err_b").unwrap();
            assert!(b_err.is_finite() && b_err >= 0.0, "{method}: {b_err}");
            assert!(table.median_of("p=8", method, "rel_err_y_new").is_some());
        }
        // the baseline has no factor block, so no rotation-adjusted A error
        assert!(table.median_of("p=8", "baseline_x", "rel_err_a").is_none());
        assert!(table.median_of("p=8", "famar", "rel_err_a").is_some());
    }

    #[test]
    fn run_setting_is_deterministic() {
        let config = tiny_config();
        let grid = vec![("p=8".to_string(), config)];
        let opts = RunSettingOptions {
            folds: 2,
            lambda_points: 3,
            ..RunSettingOptions::default()
        };
        let a = run_setting("tiny", &grid, &opts).unwrap();
        let b = run_setting("tiny", &grid, &opts).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.rel_err_f, y.rel_err_f);
            assert_eq!(x.rel_err_b, y.rel_err_b);
            assert_eq!(x.lambda_star, y.lambda_star);
        }
    }

    #[test]
    fn estimation_only_skips_regression() {
        let mut config = tiny_config();
        config.n_new = 0;
        let grid = vec![("p=8".to_string(), config)];
        let table = run_setting("tiny", &grid, &RunSettingOptions::estimation_only()).unwrap();
        assert!(table.records.iter().all(|r| r.method == "mfm"));
    }

    #[test]
    fn normality_smoke_runs_and_studentizes() {
        let config = SimConfig {
            n: 150,
            n_pretrain: 80,
            p1: 6,
            p2: 5,
            k1: 2,
            k2: 2,
            replications: 120,
            seed: 5,
            ..SimConfig::experiment_base()
        };
        let result = normality_experiment(&config, 0.01).unwrap();
        assert_eq!(result.entries_r.len(), 12);
        assert_eq!(result.entries_c.len(), 10);
        // studentized sequences are centered near zero
        let worst = result
            .entries_r
            .iter()
            .chain(&result.entries_c)
            .map(|e| e.standardized_mean.abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 4.0 / (120.0f64).sqrt() * 3.0, "worst mean {worst}");
    }

    #[test]
    fn normality_rejects_too_few_replications() {
        let mut config = tiny_config();
        config.replications = 10;
        assert!(normality_experiment(&config, 0.01).is_err());
    }
}
