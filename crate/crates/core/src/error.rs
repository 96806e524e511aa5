use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ray {angle} lost at potential {potential:e}")]
    RayLost { angle: String, potential: f64 },

    #[error("ray {angle} did not land before potential {potential:e}")]
    NotLanded { angle: String, potential: f64 },

    #[error("root finding failed (residual {residual:e})")]
    RootFindingFailed { residual: f64 },

    #[error("InMainComponent: fixed point with |multiplier| = {multiplier_abs} is not repelling")]
    InMainComponent { multiplier_abs: f64 },

    #[error("PortraitNotFound: no ray cycle of period <= {q_max} lands at a fixed point")]
    PortraitNotFound { q_max: usize },

    #[error("OnRay: angle {0} is a boundary angle")]
    OnRay(String),

    #[error("CombinatoricsUndefined: critical orbit hits a puzzle boundary at depth {depth}")]
    CombinatoricsUndefined { depth: usize },

    #[error("ValueOutsideWake: value angle {0} is not in the characteristic sector")]
    ValueOutsideWake(String),

    #[error("DepthUnavailable: requested depth {requested}, available {available}")]
    DepthUnavailable { requested: usize, available: usize },

    #[error("LabelMismatch: {0}")]
    LabelMismatch(String),

    #[error("OnBoundary: point within {tolerance:e} of a depth-{depth} boundary")]
    OnBoundary { depth: usize, tolerance: f64 },

    #[error("OutsideTruncation: point lies outside the depth-{depth} equipotential")]
    OutsideTruncation { depth: usize },

    #[error("BudgetExhausted: {operation} exceeded budget {budget}")]
    BudgetExhausted { operation: String, budget: usize },

    #[error("NeverEscapes: central cascade in piece of depth {depth} exceeds budget (possibly renormalizable, inconclusive)")]
    NeverEscapes { depth: usize },

    #[error("NotRecurrent: critical orbit never returns to the critical piece of depth {depth}")]
    NotRecurrent { depth: usize },

    #[error("DegenerateAnnulus: {0}")]
    DegenerateAnnulus(String),

    #[error("NonConvergence: {0}")]
    NonConvergence(String),

    #[error("HypothesisNotMet: {0}")]
    HypothesisNotMet(String),
}

impl Error {
    pub fn budget(operation: &str, budget: usize) -> Self {
        Error::BudgetExhausted {
            operation: operation.to_string(),
            budget,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::RayLost { .. } => "RayLost",
            Error::NotLanded { .. } => "NotLanded",
            Error::RootFindingFailed { .. } => "RootFindingFailed",
            Error::InMainComponent { .. } => "InMainComponent",
            Error::PortraitNotFound { .. } => "PortraitNotFound",
            Error::OnRay(_) => "OnRay",
            Error::CombinatoricsUndefined { .. } => "CombinatoricsUndefined",
            Error::ValueOutsideWake(_) => "ValueOutsideWake",
            Error::DepthUnavailable { .. } => "DepthUnavailable",
            Error::LabelMismatch(_) => "LabelMismatch",
            Error::OnBoundary { .. } => "OnBoundary",
            Error::OutsideTruncation { .. } => "OutsideTruncation",
            Error::BudgetExhausted { .. } => "BudgetExhausted",
            Error::NeverEscapes { .. } => "NeverEscapes",
            Error::NotRecurrent { .. } => "NotRecurrent",
            Error::DegenerateAnnulus(_) => "DegenerateAnnulus",
            Error::NonConvergence(_) => "NonConvergence",
            Error::HypothesisNotMet(_) => "HypothesisNotMet",
        }
    }

    /// Budget-limited outcomes are inconclusive rather than mathematical facts.
    pub fn is_inconclusive(&self) -> bool {
        matches!(
            self,
            Error::BudgetExhausted { .. } | Error::NeverEscapes { .. }
        )
    }
}
