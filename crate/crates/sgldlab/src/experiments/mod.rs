//! Experiment drivers: each submodule owns one figure- or table-producing
//! run, with a serde-able config, an in-memory result, and optional CSV +
//! meta.json output that is byte-identical across reruns and worker counts.

pub mod bias_variance;
pub mod common;
pub mod cost_regimes;
pub mod heatmaps;
pub mod logreg_rmse;
pub mod oracle_validate;
pub mod rmse_constant_cost;

pub use bias_variance::{run_bias_variance, BiasVarianceConfig, BiasVarianceResult};
pub use common::{config_hash, write_csv, write_meta, ExperimentError};
pub use cost_regimes::{
    predict_cost, run_cost_regimes, CostRegimePrediction, CostRegimesConfig, CostRegimesResult,
    SchemeKind,
};
pub use heatmaps::{run_heatmap, HeatmapConfig, HeatmapResult};
pub use logreg_rmse::{run_logreg_rmse, LogregRmseConfig, LogregRmseResult};
pub use oracle_validate::{run_oracle_validate, OracleValidateConfig, OracleValidateResult};
pub use rmse_constant_cost::{
    run_rmse_constant_cost, RmseConstantCostConfig, RmseConstantCostResult,
};
