use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("expected a {expected}x{expected} matrix, got {rows}x{cols}")]
    Shape {
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("{what} violates its defining invariant (deviation {deviation:.3e})")]
    Invariant { what: &'static str, deviation: f64 },
    #[error("statistics of the operands do not match")]
    StatisticsMismatch,
    #[error("element lies on the fermionic quasi-boundary (|det| = {determinant:.3e})")]
    FermionBoundary { determinant: f64 },
    #[error("pair is not admissible for the cocycle (|det| = {determinant:.3e})")]
    DegeneratePair { determinant: f64 },
    #[error("branches ({k}, {l}) form a degenerate pair (|det| = {determinant:.3e})")]
    DegenerateBranchPair { k: usize, l: usize, determinant: f64 },
    #[error("cover elements are anchored to different reference complex structures")]
    ReferenceMismatch,
    #[error("target complex structure is incompatible: {0}")]
    InvalidTarget(String),
    #[error("reference repair failed after {attempts} attempts (best margin {best_margin:.3e})")]
    RepairFailed { attempts: usize, best_margin: f64 },
    #[error("generalized eigenbasis is ill-conditioned (condition {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error("normal form construction failed: {0}")]
    NormalForm(String),
    #[error("phase-space index {index} outside 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("Fock space of dimension {dim} exceeds the oracle limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },
    #[error("truncated Fock amplitude not converged (cutoff doubling changed it by {difference:.3e})")]
    TruncationNotConverged { difference: f64 },
    #[error("sign continuation ambiguous for branches ({k}, {l}): distance ratio {ratio:.3}")]
    ContinuationAmbiguous { k: usize, l: usize, ratio: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::Invariant { .. } => "invariant",
            Error::StatisticsMismatch => "statistics_mismatch",
            Error::FermionBoundary { .. } => "fermion_boundary",
            Error::DegeneratePair { .. } => "degenerate_pair",
            Error::DegenerateBranchPair { .. } => "degenerate_pair",
            Error::ReferenceMismatch => "reference_mismatch",
            Error::InvalidTarget(_) => "invalid_target",
            Error::RepairFailed { .. } => "repair_failed",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::NormalForm(_) => "normal_form",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::DimensionTooLarge { .. } => "dimension_too_large",
            Error::TruncationNotConverged { .. } => "truncation_not_converged",
            Error::ContinuationAmbiguous { .. } => "continuation_ambiguous",
            Error::InvalidInput(_) => "invalid_input",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
