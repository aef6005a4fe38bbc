use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("power iteration did not converge in {iterations} iterations (last Rayleigh quotient {rayleigh:e}, residual {residual:e})")]
    EigenNoConvergence {
        iterations: usize,
        rayleigh: f64,
        residual: f64,
    },

    #[error("degenerate beam for device {device}, segment {segment}: |h^H w| = {gain:e}")]
    DegenerateBeam {
        device: usize,
        segment: usize,
        gain: f64,
    },

    #[error("ADMM did not converge in {iterations} iterations (primal residual {primal:e}, dual residual {dual:e})")]
    AdmmNoConvergence {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("beamformer initialization failed: {0}")]
    Initialization(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported task: {0}")]
    UnsupportedTask(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
