use std::path::PathBuf;

use crate::trace::ConvergenceTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("unsupported derivative order {0} (supported: 1, 2)")]
    UnsupportedOrder(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("blur kernel ({kernel_w}x{kernel_h}) is larger than the image ({image_w}x{image_h})")]
    KernelTooLarge {
        kernel_w: usize,
        kernel_h: usize,
        image_w: usize,
        image_h: usize,
    },

    #[error("invalid kernel: {0}")]
    Kernel(String),

    #[error("numerical failure: {message}")]
    Numerical {
        message: String,
        trace: Option<Box<ConvergenceTrace>>,
    },

    #[error("image too small: {0}")]
    ImageTooSmall(String),

    #[error("{0}")]
    Usage(String),

    #[error("failed to parse {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, trace: Option<ConvergenceTrace>) -> Self {
        Error::Numerical {
            message: msg.into(),
            trace: trace.map(Box::new),
        }
    }

    pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::Dimension { expected, actual })
        }
    }
}
