use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid degree m = {m} for order n = {n}")]
    InvalidDegree { n: i32, m: i32 },
    #[error("invalid order {0}: orders must be non-negative")]
    InvalidOrder(i32),
    #[error("output order {n_out} is below input order {n_in}")]
    InvalidTruncation { n_in: u32, n_out: u32 },
    #[error("small-translation form requires k·r < 1, got k·r = {0}")]
    NotApplicable(f64),
    #[error("no near-uniform table for {0} points (supported: 4, 12, 20, 24, 32)")]
    UnsupportedGeometry(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate system: no singular value above the inversion threshold")]
    DegenerateSystem,
    #[error("source count {sources} must be below the coefficient count {dim}")]
    InvalidSourceCount { sources: usize, dim: usize },
    #[error("effective rank is undefined for a zero matrix")]
    UndefinedRank,
    #[error("SNR is undefined for a zero-power reference signal")]
    UndefinedSnr,
    #[error("frequency {freq} Hz is at or above the Nyquist limit of fs = {fs} Hz")]
    Aliasing { freq: f64, fs: f64 },
}
