use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("time {time} outside [{start}, {end}]")]
    TimeOutOfRange { time: f64, start: f64, end: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Monte Carlo estimate is non-finite at time index {time_index}, node {node}")]
    MonteCarloNonFinite { time_index: usize, node: usize },
    #[error("Picard iteration diverged at iteration {iteration}: sup difference {diff}")]
    Divergence { iteration: usize, diff: f64 },
    #[error("step {dt} violates the stability bound {bound}")]
    Unstable { dt: f64, bound: f64 },
    #[error("oracle state blew up at s = {time}")]
    BlowUp { time: f64 },
    #[error("map is not a diffeomorphism: {0}")]
    NotDiffeomorphism(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite<T: num_traits::Float>(values: &[T], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}
