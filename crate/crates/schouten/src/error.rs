use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside its contract.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An eigenvalue tuple left the admissibility cone of the symmetric
    /// function; the message names the violated inequality.
    #[error("outside admissibility cone: {0}")]
    Cone(String),

    /// The augmented tensor is inadmissible at a node, so the residual is
    /// undefined there.
    #[error("inadmissible state at node {node} (cone margin {margin:.3e})")]
    Inadmissible { node: usize, margin: f64 },

    /// A metric lost positive definiteness (Cholesky failed) at a node.
    #[error("degenerate metric at node {node}")]
    DegenerateMetric { node: usize },

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A linear system could not be solved.
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
}

pub type Result<T> = std::result::Result<T, Error>;
