//! Config-driven experiments: seeded baseline/attack pairs, CSV output,
//! parameter sweeps and the verification suites.

mod config;
mod csv;
mod runner;
mod verify;

pub use config::{parse_config, parse_config_unchecked, EnvConfig, ExperimentConfig};
pub use csv::{format_real, EPISODE_HEADER, SUMMARY_HEADER};
pub use runner::{run_ablation, run_experiment, ExperimentOutcome, RunResult, SummaryRow};
pub use verify::{
    bisect, lemma_sweep, m1_dynamic_optimum, m1_static_gap, m2_dynamic_optimum, m2_static_q,
    random_policy, run_verification, theorem_sweep, CheckRow, LemmaResiduals, Suite,
    TheoremResiduals, VerificationReport, LEMMA_TOL, THEOREM_TOL, THRESHOLD_TOL,
};
