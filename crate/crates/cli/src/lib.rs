//! Command-line front end: configuration files, figure presets and the
//! `radcool` command.

pub mod app;
pub mod config;
pub mod presets;

pub use app::{run, EXIT_DIVERGED, EXIT_INVALID, EXIT_OK, OUT_ENV};
pub use config::{parse_and_validate, DriveSpec, RunConfig, Violation};
pub use presets::{figure_preset, FigureId, Preset};
