use thiserror::Error;

use crate::geometry::Space;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("singular evaluation: {what} at distance {distance:e}")]
    Singular { what: &'static str, distance: f64 },

    #[error("point outside the {space:?} chart domain")]
    ChartDomain { space: Space },

    #[error("zero normal vector")]
    ZeroNormal,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state outside the averaging region R: {0}")]
    OutsideRegion(&'static str),

    #[error("Kepler equation did not converge for mean anomaly {mean_anomaly} and eccentricity {eccentricity}")]
    KeplerNonConvergence { mean_anomaly: f64, eccentricity: f64 },

    #[error("quadrature did not reach tolerance within {cap} nodes (last change {change:e})")]
    NodeCapExceeded { cap: usize, change: f64 },

    #[error("osculating orbit passes within {distance:e} of the secondary center")]
    OrbitExcluded { distance: f64 },

    #[error("osculating orbit leaves the chart domain (margin {margin:e})")]
    OrbitLeavesChart { margin: f64 },

    #[error("no return to the initial phase within {periods} trial periods")]
    PeriodDetection { periods: usize },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("maximum number of steps ({0}) exceeded")]
    MaxSteps(usize),

    #[error("degenerate wall gradient at ({x}, {y})")]
    DegenerateNormal { x: f64, y: f64 },

    #[error("impact within {distance:e} of a focus at t = {t}")]
    FocusImpact { t: f64, distance: f64 },

    #[error("impact within {distance:e} of an arc endpoint at t = {t}")]
    CornerImpact { t: f64, distance: f64 },
}
