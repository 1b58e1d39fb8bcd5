//! Synthetic experiment harness: data generation under the factor-regression
//! law, the Monte-Carlo experiments, rolling-window prediction, varimax
//! rotation of loadings, and machine-readable result emission.

pub mod config;
pub mod experiments;
pub mod generate;
pub mod output;
pub mod rolling;
pub mod varimax;

pub use config::{
    preset_appendix_h1, preset_appendix_h2, preset_appendix_h3, preset_normality,
    preset_setting1, preset_setting2, AMode, SettingGrid, SimConfig,
};
pub use experiments::{
    normality_experiment, run_setting, AggRecord, EntryNormality, NormalityResult, RegMethod,
    RepRecord, RunSettingOptions, SimResultTable,
};
pub use generate::{
    generate, generate_lowrank_b, stream_rng, GeneratedData, OracleRotation, TruthBundle,
};
pub use rolling::{rolling_predict, LambdaRule, RollingMethod, RollingOptions, RollingPrediction, RollingResult};
pub use varimax::{varimax, varimax_criterion, varimax_with_rotation};
