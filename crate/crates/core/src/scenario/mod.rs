//! Demand-response experiments: configuration, the Monte Carlo and
//! weighted-PDE pipelines, and their comparison.

mod compare;
mod config;
mod run;
mod verify;

pub use compare::{
    compare_series, event_responses, rebound_peaks, rebound_period, smooth, ComparisonReport,
    EventResponse, PEAK_PROMINENCE,
};
pub use config::{
    CompareSection, GridSection, HvacInit, HvacSection, OutputSection, PevInit, PevSection,
    PriceSection, ScenarioConfig, ScenarioKind, Seeds, SCHEMA_VERSION,
};
pub use run::{
    assess, cluster_population, comparison_csv, initial_states, run_pev, run_price_response,
    run_scenario, run_setback, sample_loads, simulate_mc, simulate_pde, write_mc, write_outcome,
    write_pde, Check, ClusterSolve, McOutcome, PdeOutcome, ScenarioOutcome, ScenarioReport,
    CLUSTERS_FILE, COMPARISON_CSV_HEADER, COMPARISON_FILE, MC_POWER_FILE, PDE_POWER_FILE,
    REPORT_FILE,
};
pub use verify::verify_outputs;
