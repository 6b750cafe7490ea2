//! Configuration, end-to-end runs, rate calibration and run analysis.

mod analyze;
mod calibrate;
mod config;
mod schedule;
mod simulate;

pub use analyze::{analyze, AnalysisSettings, BlockResult, CycleResult, Report, Summary};
pub use calibrate::{calibrate_rates, expected_rates, window_fraction, Calibration, CalibrationTargets, ExpectedRates};
pub use config::{default_cycle, remote_physical, Block, LinkConfig};
pub use schedule::{
    contiguous, read_schedule, schedule_from_csv, schedule_to_csv, validate_schedule, write_schedule, ScheduledBlock,
    SCHEDULE_HEADER,
};
pub use simulate::{run_simulation, simulate, BlockSummary, RunManifest, SimulatedRun};
