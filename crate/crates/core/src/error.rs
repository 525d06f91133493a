use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("chaos order must be at least 1")]
    ZeroOrder,
    #[error("dimension must be positive, got {0}")]
    ZeroDimension(u64),
    #[error("index {index} has no numeric size (symbol {symbol:?})")]
    Unbound { index: usize, symbol: Option<String> },
    #[error("unknown dimension symbol {0:?}")]
    UnknownSymbol(String),
    #[error("malformed schema: {0}")]
    Malformed(String),
    #[error("invalid schema: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum FlatteningError {
    #[error("explicit flattening of {rows}x{cols} exceeds oracle cap {cap}")]
    OracleTooLarge { rows: u64, cols: u64, cap: u64 },
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("Bernoulli parameter {0} outside (0, 1)")]
    InvalidParam(f64),
    #[error("profile order {expected} does not match chaos parameters of order {found}")]
    OrderMismatch { expected: usize, found: usize },
    #[error("iteration count {k} exceeds chaos order {q}")]
    TooManyIterations { k: u32, q: u32 },
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("duplicate vertex {0:?}")]
    DuplicateVertex(String),
    #[error("self-loop at vertex {0:?}")]
    SelfLoop(String),
    #[error("duplicate edge {0:?}-{1:?}")]
    DuplicateEdge(String, String),
    #[error("shape has {0} edges; at most 16 are supported")]
    TooManyEdges(usize),
    #[error("n = {n} is smaller than the {vertices} vertices of the shape")]
    TooFewLabels { n: u64, vertices: usize },
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("malformed shape: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("materialization needs {needed} cells, cap is {cap}")]
    CapExceeded { needed: u128, cap: u128 },
    #[error("coupled mode needs every chaos coordinate to share one index-set template: {0}")]
    CoupledUnsupported(String),
    #[error("coefficients are not symmetrizable: {0}")]
    NotSymmetrizable(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("scaling fit: {0}")]
    Fit(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}
