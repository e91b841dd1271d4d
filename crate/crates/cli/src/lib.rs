//! Command-line front end: configuration, artifact files and the
//! subcommand pipelines.

pub mod artifacts;
pub mod config;
pub mod method;
pub mod pipeline;

use std::fmt;

use deconfrec::Error;

/// A numerical check that ran to completion but did not pass.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

/// Process exit status for a failed command: 2 configuration, 3 I/O,
/// 4 malformed or unusable data, 5 numerical failure, 1 anything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) => 2,
                Error::Io { .. } => 3,
                Error::Parse { .. } | Error::EmptyKCore { .. } | Error::Data(_) | Error::Format(_) | Error::Dimension(_) => 4,
                Error::DensityUnreachable { .. } => 2,
                Error::NonFinite(_) => 5,
            };
        }
        if cause.is::<NumericalFailure>() {
            return 5;
        }
        if cause.is::<toml::de::Error>() {
            return 2;
        }
        if cause.is::<serde_json::Error>() {
            return 4;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}
