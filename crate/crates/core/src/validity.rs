use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// The poset must have exactly one face of codimension 0.
    TopCount,
    /// A cover relation must join codimension `c + 1` to codimension `c`.
    CoverNotGraded,
    /// Face codimension exceeds the orbit-space dimension.
    CodimExceedsDim,
    /// A face of codimension `n` must lie in exactly `n` facets.
    FacetCount,
    /// The faces above a face must form a Boolean lattice on its facets.
    IntervalNotBoolean,
    /// Face codimension exceeds the torus rank.
    CodimExceedsRank,
    /// Facet labels at a face do not extend to a basis of ℤ^k.
    NotDirectSummand,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub faces: Vec<String>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self { valid: violations.is_empty(), violations }
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    pub fn merge(mut self, other: ValidityReport) -> Self {
        self.violations.extend(other.violations);
        self.valid = self.violations.is_empty();
        self
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}
