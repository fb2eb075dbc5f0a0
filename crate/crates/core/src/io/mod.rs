//! Run logs, config files, replay and calibration.

pub mod calibrate;
pub mod config_file;
pub mod log;
pub mod replay;

pub use calibrate::{calibrate, Calibration, CalibrationError};
pub use config_file::{apply_config_text, load_config, ConfigFileError};
pub use log::{log_from_str, log_to_string, read_log, write_log, LogError, Record, RunLog};
pub use replay::{replay, write_events, write_metrics, ReplayError, ReplayOutput};
