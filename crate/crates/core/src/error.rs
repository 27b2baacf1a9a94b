use crate::discretization::Field;
use crate::plap::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("fields live on different grids")]
    GridMismatch,

    /// The iteration budget ran out; the best iterate is attached.
    #[error("{context}: no convergence after {} iterations (residual {:.3e})", report.iterations, report.final_residual_sup)]
    NonConvergence {
        context: String,
        report: SolveReport,
        best: Box<Field>,
    },

    #[error("{context}: iterates diverged (sup norm {sup_norm:.3e} exceeds {limit:.3e})")]
    Divergence {
        context: String,
        sup_norm: f64,
        limit: f64,
    },

    #[error("iterate left the admissible set: {0}")]
    IterateEscape(String),

    #[error("wrong regime: {0}")]
    WrongRegime(String),

    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
