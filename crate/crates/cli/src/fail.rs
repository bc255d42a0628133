//! Failure classification. Every error escaping to `main` carries one of
//! the documented exit codes: 2 configuration, 3 data, 4 numerical.

use kdglm_core::error::Error as CoreError;
use std::fmt;

#[derive(Debug)]
pub enum Fail {
    /// Invalid configuration or model structure (exit 2).
    Config(String),
    /// Unreadable or inconsistent input data (exit 3).
    Data(String),
    /// Numerical breakdown while fitting, smoothing or forecasting (exit 4).
    Numerical(String),
    /// Environment trouble outside the documented taxonomy, e.g. an
    /// unwritable output directory (exit 1).
    Io(String),
}

impl Fail {
    pub fn exit_code(&self) -> i32 {
        match self {
            Fail::Config(_) => 2,
            Fail::Data(_) => 3,
            Fail::Numerical(_) => 4,
            Fail::Io(_) => 1,
        }
    }

    /// Prepends a series name, used when several fits share one process.
    pub fn with_prefix(self, prefix: &str) -> Fail {
        match self {
            Fail::Config(m) => Fail::Config(format!("{prefix}: {m}")),
            Fail::Data(m) => Fail::Data(format!("{prefix}: {m}")),
            Fail::Numerical(m) => Fail::Numerical(format!("{prefix}: {m}")),
            Fail::Io(m) => Fail::Io(format!("{prefix}: {m}")),
        }
    }

    /// Classifies a library error. Structural complaints are configuration
    /// problems even when they surface mid-run; everything else counts as
    /// numerical. Index annotations become part of the message, labelled
    /// `t` for time steps and `j` for forecast horizons.
    pub fn from_core(err: CoreError, index_name: &str) -> Fail {
        fn structural(e: &CoreError) -> bool {
            match e {
                CoreError::Config(_) => true,
                CoreError::AtIndex { source, .. } => structural(source),
                _ => false,
            }
        }
        let text = match &err {
            CoreError::AtIndex { index, source } => {
                format!("{source} (at {index_name}={index})")
            }
            other => format!("{other}"),
        };
        if structural(&err) {
            Fail::Config(text)
        } else {
            Fail::Numerical(text)
        }
    }
}

impl fmt::Display for Fail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fail::Config(m) => write!(f, "configuration error: {m}"),
            Fail::Data(m) => write!(f, "data error: {m}"),
            Fail::Numerical(m) => write!(f, "numerical error: {m}"),
            Fail::Io(m) => write!(f, "{m}"),
        }
    }
}
