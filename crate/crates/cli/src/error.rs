use std::path::PathBuf;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] croscale_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn io_err(path: impl Into<PathBuf>, source: std::io::Error) -> CliError {
    CliError::Core(croscale_core::Error::Io {
        path: path.into(),
        source,
    })
}

impl CliError {
    /// 2 argument error, 3 data or format error, 4 numerical failure.
    pub fn exit_code(&self) -> ExitCode {
        let code = match self {
            CliError::Usage(_) => 2,
            CliError::Image { .. } | CliError::Csv { .. } => 3,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(e) if e.is_data_error() => 3,
            CliError::Core(_) => 2,
        };
        ExitCode::from(code)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use croscale_core::Error;

    fn code(e: CliError) -> ExitCode {
        e.exit_code()
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        let io = || std::io::Error::new(std::io::ErrorKind::NotFound, "x");
        assert_eq!(code(usage("bad flag")), ExitCode::from(2));
        assert_eq!(code(Error::Argument("a".into()).into()), ExitCode::from(2));
        assert_eq!(code(Error::Range("r".into()).into()), ExitCode::from(2));
        assert_eq!(
            code(Error::Format { offset: 0, message: "m".into() }.into()),
            ExitCode::from(3)
        );
        assert_eq!(
            code(Error::Dataset { tuple: "t".into(), message: "m".into() }.into()),
            ExitCode::from(3)
        );
        assert_eq!(code(Error::Config("c".into()).into()), ExitCode::from(3));
        assert_eq!(code(io_err("p", io())), ExitCode::from(3));
        assert_eq!(
            code(Error::Training { epoch: 3, message: "nan".into() }.into()),
            ExitCode::from(4)
        );
        assert_eq!(code(Error::FilterDegenerate { step: 2 }.into()), ExitCode::from(4));
    }
}
