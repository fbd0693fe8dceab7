use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("enumeration over 2^{n} configurations exceeds the limit 2^{max}")]
    TooLarge { n: usize, max: usize },
    #[error("gaps sum to {sum}, expected the lattice size {n}")]
    GapMismatch { sum: usize, n: usize },
    #[error("site {0} appears more than once")]
    DuplicateSite(i64),
    #[error("box of size {l0} right of site {x} holds no mobile cluster")]
    BadBox { x: i64, l0: usize },
    #[error("no positive-rate path inside the window exchanges sites {y} and {z}")]
    Unreachable { y: i64, z: i64 },
    #[error("box size {l} exceeds half the lattice size {n}")]
    BoxTooLarge { l: usize, n: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
