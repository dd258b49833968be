use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("matrix is rank deficient: singular value s_{index} = {value:e} is below tolerance")]
    Singular { index: usize, value: f64 },

    #[error("cocycle is nilpotent (A^({witness}) vanishes); use is_nilpotent instead of a reduction")]
    Nilpotent { witness: usize },

    #[error("degenerate reduction: {0}")]
    DegenerateReduction(String),

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
