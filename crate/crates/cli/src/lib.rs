//! Experiment driver behind the `bjj` binary.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod pipelines;
pub mod presets;
pub mod sweep;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// Acceptance criteria failed, or a run failed numerically.
    pub const FAILED: u8 = 1;
    pub const CONFIG: u8 = 2;
}
