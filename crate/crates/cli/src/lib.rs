//! Library side of the `bangkit` command-line tool.

pub mod commands;
pub mod config;
pub mod pool;
pub mod seqdir;

pub use config::{Overrides, PipelineConfig};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    UsageOrIo,
    Unconverged,
    AcceptanceFailed,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::UsageOrIo => 1,
            Status::Unconverged => 2,
            Status::AcceptanceFailed => 3,
        }
    }
}

/// Log level from the value of `BANGKIT_LOG`; unset or unrecognized means `error`.
pub fn log_level(value: Option<&str>) -> log::LevelFilter {
    match value.map(|v| v.trim().to_ascii_lowercase()).as_deref() {
        Some("debug") => log::LevelFilter::Debug,
        Some("info") => log::LevelFilter::Info,
        _ => log::LevelFilter::Error,
    }
}
