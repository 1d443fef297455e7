use thiserror::Error;

pub type Result<T> = std::result::Result<T, GeoError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("unsupported dimension {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("density must be positive, got {0}")]
    NonPositiveDensity(f64),
    #[error("resolution too coarse: h = {h} is not below the smallest gap {gap}")]
    ResolutionTooCoarse { h: f64, gap: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("distance matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("distance matrix has nonzero diagonal at {0}")]
    NonzeroDiagonal(usize),
    #[error("distance between distinct points ({0}, {1}) is not strictly positive")]
    NonPositiveDistance(usize, usize),
    #[error("triangle inequality violated: d({a},{c}) > d({a},{b}) + d({b},{c})")]
    TriangleViolation { a: usize, b: usize, c: usize },
    #[error("invalid weight {value} at point {index}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("non-finite value at point {0}")]
    NonFiniteValue(usize),
    #[error("object is bound to a different space")]
    BindingMismatch,
    #[error("set is empty")]
    EmptySet,
    #[error("set has zero measure")]
    NullSet,
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("scale {scale} is below the resolution floor {floor}")]
    BelowResolution { scale: f64, floor: f64 },
    #[error("window [{r_min}, {r_max}] holds fewer than 3 grid radii")]
    WindowTooNarrow { r_min: f64, r_max: f64 },
    #[error("no candidate satisfies the constraints: {0}")]
    EmptyFamily(String),
    #[error("descent objective increased from {before} to {after} at iteration {iteration}")]
    Divergence { iteration: usize, before: f64, after: f64 },
    #[error("wrong space kind: {0}")]
    WrongSpaceKind(String),
    #[error("cover misses target point {0}")]
    CoverIncomplete(usize),
    #[error("table format: {0}")]
    Table(String),
}

impl GeoError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        GeoError::InvalidParameter { name, reason: reason.into() }
    }
}
