use thiserror::Error;

/// Error taxonomy shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter {value} outside domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("approximation failure: requested {requested:.3e}, achieved {achieved:.3e}")]
    Approximation { requested: f64, achieved: f64 },

    #[error("chart domain error: subspace meets the complement in dimension {intersection_dim}")]
    ChartDomain { intersection_dim: usize },

    #[error("ill-conditioned Lagrangian pair (smallest singular value {0:.3e})")]
    IllConditionedPair(f64),

    #[error("no complementary Lagrangian after {attempts} attempts (best margin {best_margin:.3e})")]
    SearchExhausted { attempts: usize, best_margin: f64 },

    #[error("unresolved degeneracy cluster near s = {center} ({members} members)")]
    Cluster { center: f64, members: usize },

    #[error("root spaces did not stabilize by k = {kmax}: {remaining} dimensions left, {expected_null} expected null branches")]
    Stabilization { kmax: usize, remaining: usize, expected_null: usize },

    #[error("representation error: {0}")]
    Representation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("model inconsistency: {0}")]
    ModelInconsistency(String),

    #[error("spectral flow not stable under grid doubling: N = {n} gives {sf_n}, 2N gives {sf_2n}")]
    Convergence { n: usize, sf_n: i64, sf_2n: i64 },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
