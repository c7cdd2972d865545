//! Error type shared by every module of the crate.

use thiserror::Error;

/// All failure modes surfaced by the library.
///
/// Scientific verdicts (incompatible fields, inconclusive checks) are *not*
/// errors; they are ordinary report values. Errors are reserved for misuse
/// (valence mismatches, malformed domains) and I/O failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("expression parse error at byte {pos}: {msg}")]
    ExprParse { pos: usize, msg: String },

    #[error("expression arity mismatch: component `{component}` uses variable x{var} on a {dim}-axis chart")]
    ExprArity {
        component: String,
        var: usize,
        dim: usize,
    },

    #[error("grid axis {axis} has {len} nodes; at least 4 are required for central stencils")]
    GridTooSmall { axis: usize, len: usize },

    #[error("grid must have 2 or 3 axes, got {0}")]
    BadAxisCount(usize),

    #[error("grid spacing on axis {axis} must be positive, got {value}")]
    BadSpacing { axis: usize, value: f64 },

    #[error("masked-in region is not edge-connected ({components} components)")]
    DisconnectedMask { components: usize },

    #[error("mask has no interior-evaluable node; nothing can be differenced")]
    NoInterior,

    #[error("mask is empty")]
    EmptyMask,

    #[error("bitmap length {got} does not match grid node count {want}")]
    BitmapLength { got: usize, want: usize },

    #[error("canonical generators are only defined for named mask rules; generators must be supplied by the user")]
    GeneratorsNeedNamedRule,

    #[error("mask rule `{rule}` is not defined for a {dim}-axis grid")]
    RuleDimension { rule: String, dim: usize },

    #[error("spherical chart grid must keep x2 within [{lo}, {hi}] to stay clear of the poles")]
    PoleRange { lo: f64, hi: f64 },

    #[error("valence mismatch: operator `{op}` expects {expected}, got {got}")]
    ValenceMismatch {
        op: String,
        expected: String,
        got: String,
    },

    #[error("component count mismatch for valence {valence}: expected {expected}, got {got}")]
    ComponentCount {
        valence: String,
        expected: usize,
        got: usize,
    },

    #[error("operator `{op}` requires a metric chart")]
    MetricRequired { op: String },

    #[error("operator `{op}` requires chart {expected}, field is on {got}")]
    ChartMismatch {
        op: String,
        expected: String,
        got: String,
    },

    #[error("fields live on different domains")]
    DomainMismatch,

    #[error("codifferential requires an orthonormal (Cartesian) chart")]
    CodifferentialChart,

    #[error("traction direction is not unit length: |N| = {0}")]
    NonUnitNormal(f64),

    #[error("operator pair ({first}, {second}) does not chain: {why}")]
    NonChainingPair {
        first: String,
        second: String,
        why: String,
    },

    #[error("isomorphism `{iso}` does not accept valence {got}")]
    IsoValence { iso: String, got: String },

    #[error("unknown identifier `{kind}` for {what}")]
    UnknownId { kind: String, what: String },

    #[error("chain validation failed: {0:?}")]
    InvalidChain(Vec<String>),

    #[error("loop exits the masked-in region near vertex {vertex}")]
    LoopExitsMask { vertex: usize },

    #[error("surface triangulation is not consistently oriented: {0}")]
    SurfaceOrientation(String),

    #[error("metric is not positive-definite at node {node}")]
    NotPositiveDefinite { node: usize },

    #[error("discrete Jacobian is rank-deficient at node {node}")]
    RankDeficient { node: usize },

    #[error("star-shape center not declared; the homotopy reconstruction requires one")]
    StarCenterMissing,

    #[error("prior compatibility check returned `{verdict}`; reconstruction requires `compatible`")]
    NotCompatible { verdict: String },

    #[error("base node {node} is outside the masked-in region")]
    BaseOutsideMask { node: usize },

    #[error("file format error in {path}: {msg}")]
    Format { path: String, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
