use std::fmt;
use std::io;

/// Crate-wide error type.
///
/// Variants are grouped by what went wrong rather than by module, so the CLI
/// can map them onto its exit-code contract (usage=1, data=2, numeric=3).
#[derive(Debug)]
pub enum Error {
    /// A tensor dimension disagreed with what an operation required.
    Dimension { op: &'static str, detail: String },
    /// Geometry that cannot be realized (non-integral conv output, object
    /// outside the canvas, ...).
    Geometry { op: &'static str, detail: String },
    /// Batch too small for an operation that needs batch statistics.
    BatchSize { op: &'static str, required: usize, got: usize },
    /// An index (e.g. a discrete grasp angle) out of its domain.
    Index { op: &'static str, detail: String },
    /// An API contract was violated (non-scalar loss, empty batch set,
    /// backward called twice, empty dataset, ...).
    Contract { op: &'static str, detail: String },
    /// A loss or update produced a non-finite value.
    Numeric { detail: String },
    /// Underlying I/O failure.
    Io(io::Error),
    /// File did not start with the expected magic bytes.
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    /// File format version this build does not understand.
    BadVersion { expected: u16, found: u16 },
    /// Payload checksum mismatch.
    CrcMismatch { expected: u32, found: u32 },
    /// File ended before the declared contents.
    Truncated { expected: u64, found: u64 },
    /// Malformed configuration or plan text.
    Parse { detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dimension(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension { op, detail: detail.into() }
    }

    pub fn geometry(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Geometry { op, detail: detail.into() }
    }

    pub fn index(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Index { op, detail: detail.into() }
    }

    pub fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Contract { op, detail: detail.into() }
    }

    pub fn numeric(detail: impl Into<String>) -> Self {
        Error::Numeric { detail: detail.into() }
    }

    pub fn parse(detail: impl Into<String>) -> Self {
        Error::Parse { detail: detail.into() }
    }

    /// True for errors caused by bad or corrupt data rather than bad usage.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::BadMagic { .. }
                | Error::BadVersion { .. }
                | Error::CrcMismatch { .. }
                | Error::Truncated { .. }
                | Error::Parse { .. }
        )
    }

    pub fn is_numeric_error(&self) -> bool {
        matches!(self, Error::Numeric { .. })
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension { op, detail } => write!(f, "{op}: dimension error: {detail}"),
            Error::Geometry { op, detail } => write!(f, "{op}: geometry error: {detail}"),
            Error::BatchSize { op, required, got } => {
                write!(f, "{op}: batch size {got} below required {required}")
            }
            Error::Index { op, detail } => write!(f, "{op}: index error: {detail}"),
            Error::Contract { op, detail } => write!(f, "{op}: contract violation: {detail}"),
            Error::Numeric { detail } => write!(f, "numeric failure: {detail}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::BadMagic { expected, found } => write!(
                f,
                "bad magic: expected {:?}, found {:?}",
                String::from_utf8_lossy(expected),
                found
            ),
            Error::BadVersion { expected, found } => {
                write!(f, "unknown format version {found} (this build reads {expected})")
            }
            Error::CrcMismatch { expected, found } => {
                write!(f, "payload CRC mismatch: stored {expected:#010x}, computed {found:#010x}")
            }
            Error::Truncated { expected, found } => {
                write!(f, "file truncated: needed {expected} bytes, found {found}")
            }
            Error::Parse { detail } => write!(f, "parse error: {detail}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}
