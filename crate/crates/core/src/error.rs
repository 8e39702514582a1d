use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid moment index ({m},{n},{mu},{nu}): emitter indices must be 0 or 1")]
    InvalidIndex { m: u32, n: u32, mu: u32, nu: u32 },

    #[error("moment {0} is not present in the table")]
    MissingMoment(String),

    #[error("requested order {requested} exceeds the supported maximum {max}")]
    OrderTooLarge { requested: usize, max: usize },

    #[error("singular block matrix at order {order} (degenerate parameters)")]
    SingularBlock { order: usize },

    #[error("Fock truncation insufficient: population {population:.3e} in the top two levels exceeds {tol:.1e}")]
    TruncationInsufficient { population: f64, tol: f64 },

    #[error("steady state is not unique (Liouvillian null space has dimension > 1)")]
    NonUniqueSteadyState,

    #[error("zero population: correlation function is undefined")]
    ZeroPopulation,

    #[error("result has an imaginary residue {0:.3e}")]
    ImaginaryResidue(f64),

    #[error("limit not converged: halving the evaluation point shifted the result by {shift:.3e} (allowed {allowed:.3e})")]
    NotConverged { shift: f64, allowed: f64 },

    #[error("homodyne divergence at F' = 2")]
    HomodyneDivergence,

    #[error("no root found in the search bracket")]
    NoRoot,

    #[error("outside the Heitler regime: {0}")]
    OutsideHeitler(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("unsupported operator: {0}")]
    UnsupportedOperator(String),

    #[error("not enough clicks: {0}")]
    TooFewClicks(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
