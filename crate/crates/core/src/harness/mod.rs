//! The fleet-charging Monte Carlo experiment: scenario configuration, price
//! data, replication runner and result files.

mod config;
mod experiment;
mod output;
mod prices;

pub use config::{BoundSettings, BudgetKind, ConstantsChoice, PriceSource, ScenarioConfig};
pub use experiment::{
    run_experiment, ExperimentResult, ModeSummary, NoiseStats, Replication, Scenario, DOMINATION_TOL,
    FEASIBILITY_RESIDUAL,
};
pub use output::{
    format_f64, metadata_json, result_table, write_outputs, Table, EXTRA_COLUMNS, METADATA_JSON, RESULT_COLUMNS,
    RESULT_CSV,
};
pub use prices::{load_price_series, sample_sphere, synth_price_series, PRICE_HEADER, SYNTH_PRICE_MAX, SYNTH_PRICE_MIN};
