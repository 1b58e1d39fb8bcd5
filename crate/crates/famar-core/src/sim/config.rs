//! Generative configuration for the synthetic experiments.

use serde::{Deserialize, Serialize};

use crate::error::{FamarError, Result};

/// How the factor coefficient matrix is produced.
///
/// Distribution parameters follow the `(mean, sd)` convention; note that the
/// experiment recipes quote Gaussians as `(mean, variance)`, so e.g. a
/// "N(2, 4)" loading law becomes `(2.0, 2.0)` here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AMode {
    /// `A = scale * R' B C` — the coefficient implied by plain matrix
    /// regression on covariates with a factor structure.
    ScaledRtbc { scale: f64 },
    /// Entries drawn i.i.d. normal.
    IidNormal { mean: f64, sd: f64 },
}

/// Full generative recipe for one synthetic dataset family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Estimation sample size.
    pub n: usize,
    /// Pre-training sample size (disjoint split).
    pub n_pretrain: usize,
    /// Held-out sample size for out-of-sample prediction error.
    pub n_new: usize,
    pub p1: usize,
    pub p2: usize,
    pub k1: usize,
    pub k2: usize,
    /// Rank of the low-rank idiosyncratic coefficient.
    pub rank_b: usize,
    /// `(mean, sd)` of the loading entries of `R*` and `C*`.
    pub loading_dist: (f64, f64),
    pub factor_sd: f64,
    pub idio_sd: f64,
    /// Response noise scale.
    pub noise_sd: f64,
    /// `(mean, sd)` of the raw draw that is SVD-truncated into `B*`.
    pub b_dist: (f64, f64),
    pub a_mode: AMode,
    pub seed: u64,
    pub replications: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_pretrain == 0 {
            return Err(FamarError::InvalidConfig(
                "sample sizes n and n_pretrain must be positive".into(),
            ));
        }
        if self.p1 == 0 || self.p2 == 0 || self.k1 == 0 || self.k2 == 0 {
            return Err(FamarError::InvalidConfig("dimensions must be positive".into()));
        }
        if self.k1 > self.p1 || self.k2 > self.p2 {
            return Err(FamarError::InvalidConfig(
                "factor dimensions cannot exceed matrix dimensions".into(),
            ));
        }
        if self.rank_b == 0 || self.rank_b > self.p1.min(self.p2) {
            return Err(FamarError::InvalidConfig(
                "rank_b must lie in [1, min(p1, p2)]".into(),
            ));
        }
        for (name, sd) in [
            ("loading", self.loading_dist.1),
            ("factor", self.factor_sd),
            ("b", self.b_dist.1),
        ] {
            if !(sd > 0.0) {
                return Err(FamarError::InvalidConfig(format!("{} sd must be positive", name)));
            }
        }
        if self.idio_sd < 0.0 || self.noise_sd < 0.0 {
            return Err(FamarError::InvalidConfig("noise scales must be nonnegative".into()));
        }
        if self.replications == 0 {
            return Err(FamarError::InvalidConfig("replications must be positive".into()));
        }
        Ok(())
    }

    /// Base recipe shared by the experiment presets: loading entries from a
    /// normal with mean 2 and variance 4, unit-variance factors,
    /// variance-0.04 idiosyncratics, unit response noise, and `B*` truncated
    /// from a normal with mean 0.5 and variance 0.25.
    pub fn experiment_base() -> Self {
        Self {
            n: 1000,
            n_pretrain: 500,
            n_new: 0,
            p1: 20,
            p2: 30,
            k1: 2,
            k2: 2,
            rank_b: 2,
            loading_dist: (2.0, 2.0),
            factor_sd: 1.0,
            idio_sd: 0.2,
            noise_sd: 1.0,
            b_dist: (0.5, 0.5),
            a_mode: AMode::ScaledRtbc { scale: 0.5 },
            seed: 0,
            replications: 100,
        }
    }
}

/// A named family of configurations swept over one dimension.
#[derive(Debug, Clone)]
pub struct SettingGrid {
    pub name: String,
    /// `(label, config)` pairs, e.g. `("p=20", ...)`.
    pub points: Vec<(String, SimConfig)>,
}

/// The loading-normality experiment: fixed dimensions
/// `(p1, p2) = (20, 30)`, `(k1, k2) = (3, 2)`, `n = 1000`, `n' = 500`,
/// at desk scale 2000 replications.
pub fn preset_normality(seed: u64) -> SimConfig {
    SimConfig {
        p1: 20,
        p2: 30,
        k1: 3,
        k2: 2,
        replications: 2000,
        seed,
        ..SimConfig::experiment_base()
    }
}

/// Setting I: fixed `n = 1000`, `n_new = 1000`, `n' = 500`, `k1 = k2 = 2`,
/// sweeping `p1 = p2` over the desk-scale grid `{20, 40, 80}`.
pub fn preset_setting1(seed: u64) -> SettingGrid {
    let points = [20usize, 40, 80]
        .iter()
        .map(|&p| {
            let config = SimConfig {
                p1: p,
                p2: p,
                n_new: 1000,
                seed,
                ..SimConfig::experiment_base()
            };
            (format!("p={}", p), config)
        })
        .collect();
    SettingGrid { name: "setting1".into(), points }
}

/// Setting II: fixed `(p1, p2) = (80, 50)`, `(k1, k2) = (2, 4)`, `n' = 500`,
/// sweeping `n` over the desk-scale grid `{500, 1000, 2000}`.
pub fn preset_setting2(seed: u64) -> SettingGrid {
    let points = [500usize, 1000, 2000]
        .iter()
        .map(|&n| {
            let config = SimConfig {
                n,
                p1: 80,
                p2: 50,
                k1: 2,
                k2: 4,
                n_new: 1000,
                seed,
                ..SimConfig::experiment_base()
            };
            (format!("n={}", n), config)
        })
        .collect();
    SettingGrid { name: "setting2".into(), points }
}

/// Setting I sweep with the factor coefficient drawn i.i.d. from a normal
/// with mean 1000 and variance 1000^2.
pub fn preset_appendix_h1(seed: u64) -> SettingGrid {
    let mut grid = preset_setting1(seed);
    grid.name = "appendix-h1".into();
    for (_, config) in &mut grid.points {
        config.a_mode = AMode::IidNormal { mean: 1000.0, sd: 1000.0 };
    }
    grid
}

/// Setting I sweep with the factor coefficient entries scaled with the
/// problem size: i.i.d. normal with mean `p1 p2` and sd `p1 p2`.
pub fn preset_appendix_h2(seed: u64) -> SettingGrid {
    let mut grid = preset_setting1(seed);
    grid.name = "appendix-h2".into();
    for (_, config) in &mut grid.points {
        let scale = (config.p1 * config.p2) as f64;
        config.a_mode = AMode::IidNormal { mean: scale, sd: scale };
    }
    grid
}

/// Setting II-style sweep at `(p1, p2) = (70, 50)` with the factor
/// coefficient drawn i.i.d. from a normal with mean 1000 and variance 1000^2.
pub fn preset_appendix_h3(seed: u64) -> SettingGrid {
    let mut grid = preset_setting2(seed);
    grid.name = "appendix-h3".into();
    for (_, config) in &mut grid.points {
        config.p1 = 70;
        config.a_mode = AMode::IidNormal { mean: 1000.0, sd: 1000.0 };
    }
    grid
}
