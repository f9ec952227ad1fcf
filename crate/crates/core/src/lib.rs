//! Agent-based macroeconomy with firms, a household sector, a bank and an
//! energy sector, driven by calibrated shocks and steered by monetary,
//! regulatory and fiscal policy.

pub mod calendar;
pub mod econ;
pub mod error;
pub mod export;
pub mod params;
pub mod policy;
pub mod runner;
pub mod scenario;
pub mod sensitivity;
pub mod shocks;

pub use calendar::Month;
pub use econ::{annualize, Drivers, Economy, Event, EventKind, Firm, MonthDraws, MonthRecord, StepContext};
pub use error::{Error, Result};
pub use params::ModelParams;
pub use policy::{CentralBankConfig, InterventionSchedule, NoPolicy, PolicyHooks, Regime};
pub use runner::{run, run_ensemble, run_ensemble_with_cancel, run_seed, sweep, EnsembleSummary, RunMetrics, RunOutput};
pub use scenario::{RunSettings, ScenarioConfig, PRESETS};
pub use shocks::ShockSchedule;
