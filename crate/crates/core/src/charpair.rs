//! Characteristic pairs: a face poset with a circle subgroup on every facet.
//!
//! Isotropy of a deeper face is not stored. It is the subtorus generated by
//! the circles of the facets through the face, which is what the local model
//! ℂ^n × T^{k-n} × ℝ^m prescribes.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::faceposet::{FacePoset, PosetError};
use crate::lattice::{
    canonical_sign, format_vector, rows_form_direct_summand, small_rows_form_direct_summand, subtorus_of,
    IntMatrix, LatticeError, PrimitiveVector, Subtorus,
};
use crate::validity::{ValidityReport, Violation, ViolationKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CharError {
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("torus rank must be positive")]
    ZeroRank,
    #[error("facet `{0}` has no label")]
    MissingLabel(String),
    #[error("`{0}` is not a facet and cannot carry a label")]
    NotAFacet(String),
    #[error("label of `{id}` has length {len}, expected {k}")]
    WrongLength { id: String, len: usize, k: usize },
    #[error("expected {expected} facet labels, got {got}")]
    LabelCount { expected: usize, got: usize },
    #[error("face `{id}` of codimension {codim} exceeds the bound {bound}")]
    DimensionBound { id: String, codim: usize, bound: usize },
}

/// Hypotheses that cannot be decided from combinatorial data and are taken on
/// the user's word.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct Attestations {
    /// The orbit map admits a section.
    pub sections_exist: bool,
    /// Every closed face of the orbit space is contractible.
    pub faces_contractible: bool,
    /// Matched four-dimensional faces are diffeomorphic after smoothing corners.
    pub four_faces_matched: bool,
}

impl Attestations {
    pub fn both(&self, other: &Attestations) -> Attestations {
        Attestations {
            sections_exist: self.sections_exist && other.sections_exist,
            faces_contractible: self.faces_contractible && other.faces_contractible,
            four_faces_matched: self.four_faces_matched && other.four_faces_matched,
        }
    }
}

/// Local model dimensions `(n, k - n, d - n)` of ℂ^n × T^{k-n} × ℝ^{d-n}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LocalSignature {
    pub complex: usize,
    pub torus: usize,
    pub real: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharacteristicPair {
    poset: Arc<FacePoset>,
    k: usize,
    /// One sign-canonical label per facet, in facet order.
    labels: Vec<Vec<BigInt>>,
    attestations: Attestations,
}

impl CharacteristicPair {
    /// Labels keyed by facet id. Labels need not be primitive here; that is
    /// part of what [`CharacteristicPair::validate_characteristic`] checks.
    pub fn new(
        poset: Arc<FacePoset>,
        k: usize,
        labels: &BTreeMap<String, Vec<BigInt>>,
        attestations: Attestations,
    ) -> Result<Self, CharError> {
        for id in labels.keys() {
            let i = poset.index_of(id)?;
            if poset.codim(i) != 1 {
                return Err(CharError::NotAFacet(id.clone()));
            }
        }
        let ordered = poset
            .facet_indices()
            .iter()
            .map(|&f| {
                let id = poset.id(f);
                labels.get(id).cloned().ok_or_else(|| CharError::MissingLabel(id.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_facet_labels(poset, k, ordered, attestations)
    }

    /// Labels listed in facet order (facets sorted by id).
    pub fn from_facet_labels(
        poset: Arc<FacePoset>,
        k: usize,
        mut labels: Vec<Vec<BigInt>>,
        attestations: Attestations,
    ) -> Result<Self, CharError> {
        if k == 0 {
            return Err(CharError::ZeroRank);
        }
        let facets = poset.facet_indices();
        if labels.len() != facets.len() {
            return Err(CharError::LabelCount { expected: facets.len(), got: labels.len() });
        }
        for (label, &f) in labels.iter_mut().zip(facets) {
            if label.len() != k {
                return Err(CharError::WrongLength { id: poset.id(f).to_string(), len: label.len(), k });
            }
            canonical_sign(label);
        }
        Ok(Self { poset, k, labels, attestations })
    }

    pub fn from_i64_labels(poset: Arc<FacePoset>, k: usize, labels: &[&[i64]]) -> Result<Self, CharError> {
        let labels = labels.iter().map(|l| l.iter().map(|&x| BigInt::from(x)).collect()).collect();
        Self::from_facet_labels(poset, k, labels, Attestations::default())
    }

    pub fn poset(&self) -> &FacePoset {
        &self.poset
    }

    pub fn poset_arc(&self) -> &Arc<FacePoset> {
        &self.poset
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim_orbit(&self) -> usize {
        self.poset.dim()
    }

    pub fn attestations(&self) -> &Attestations {
        &self.attestations
    }

    pub fn with_attestations(mut self, attestations: Attestations) -> Self {
        self.attestations = attestations;
        self
    }

    /// Labels in facet order.
    pub fn labels(&self) -> &[Vec<BigInt>] {
        &self.labels
    }

    /// Label of the facet with face index `f`.
    pub fn facet_label(&self, f: usize) -> Option<&[BigInt]> {
        self.poset.facet_position(f).map(|p| self.labels[p].as_slice())
    }

    pub fn label_of(&self, id: &str) -> Result<&[BigInt], CharError> {
        let i = self.poset.index_of(id)?;
        self.facet_label(i).ok_or_else(|| CharError::NotAFacet(id.to_string()))
    }

    /// Labels keyed by facet id.
    pub fn label_map(&self) -> BTreeMap<String, Vec<BigInt>> {
        self.poset
            .facet_indices()
            .iter()
            .zip(&self.labels)
            .map(|(&f, l)| (self.poset.id(f).to_string(), l.clone()))
            .collect()
    }

    /// Labels of the facets containing face `i`, as matrix rows.
    pub fn star_labels(&self, i: usize) -> Vec<Vec<BigInt>> {
        self.poset
            .facet_indices_containing(i)
            .iter()
            .map(|&f| self.facet_label(f).expect("facet").to_vec())
            .collect()
    }

    /// Isotropy subtorus of a face: the saturated span of the labels of the
    /// facets through it. The top face gets the trivial subtorus.
    pub fn lambda_of_face(&self, id: &str) -> Result<Subtorus, CharError> {
        let i = self.poset.index_of(id)?;
        Ok(subtorus_of(self.k, &self.star_labels(i))?)
    }

    /// Checks the local-standardness condition at every face: the labels of the
    /// `n` facets through a codimension-`n` face extend to a basis of ℤ^k.
    pub fn validate_characteristic(&self) -> ValidityReport {
        let small: Option<Vec<Vec<i64>>> = self
            .labels
            .iter()
            .map(|l| l.iter().map(|x| x.to_i64()).collect::<Option<Vec<i64>>>())
            .collect();
        let mut violations = Vec::new();
        let mut rows: Vec<&[i64]> = Vec::with_capacity(self.k);
        for i in 0..self.poset.len() {
            let n = self.poset.codim(i);
            if n > self.k {
                violations.push(Violation {
                    kind: ViolationKind::CodimExceedsRank,
                    faces: vec![self.poset.id(i).to_string()],
                    detail: format!("codim {n} exceeds torus rank {}", self.k),
                });
                continue;
            }
            if n == 0 {
                continue;
            }
            let star = self.poset.facet_indices_containing(i);
            let ok = match &small {
                Some(small) => {
                    rows.clear();
                    rows.extend(star.iter().map(|&f| small[self.poset.facet_position(f).unwrap()].as_slice()));
                    small_rows_form_direct_summand(&rows, self.k)
                }
                None => None,
            }
            .unwrap_or_else(|| rows_form_direct_summand(&self.star_labels(i), self.k));
            if !ok {
                let shown: Vec<String> = self.star_labels(i).iter().map(|r| format_vector(r)).collect();
                violations.push(Violation {
                    kind: ViolationKind::NotDirectSummand,
                    faces: vec![self.poset.id(i).to_string()],
                    detail: format!("labels [{}] do not extend to a basis of Z^{}", shown.join(","), self.k),
                });
            }
        }
        ValidityReport::from_violations(violations)
    }

    /// Poset validity followed by characteristic validity.
    pub fn validate(&self) -> ValidityReport {
        let poset = self.poset.validate();
        if !poset.is_valid() {
            return poset;
        }
        self.validate_characteristic()
    }

    pub fn local_signature(&self, id: &str) -> Result<LocalSignature, CharError> {
        let i = self.poset.index_of(id)?;
        let n = self.poset.codim(i);
        let bound = self.k.min(self.dim_orbit());
        if n > bound {
            return Err(CharError::DimensionBound { id: id.to_string(), codim: n, bound });
        }
        Ok(LocalSignature { complex: n, torus: self.k - n, real: self.dim_orbit() - n })
    }

    /// The pair with every label replaced by `A·λ`, `A` acting on columns.
    pub fn transformed(&self, a: &IntMatrix) -> Result<Self, CharError> {
        if a.nrows() != self.k || a.ncols() != self.k {
            return Err(LatticeError::DimensionMismatch(format!("{}x{} matrix on rank {}", a.nrows(), a.ncols(), self.k)).into());
        }
        let labels = self.labels.iter().map(|l| a.apply(l)).collect::<Result<Vec<_>, _>>()?;
        Self::from_facet_labels(self.poset.clone(), self.k, labels, self.attestations)
    }

    /// The pair on a renamed copy of the poset.
    pub fn renamed(&self, rename: impl Fn(&str) -> String) -> Result<Self, CharError> {
        let poset = Arc::new(self.poset.renamed(&rename)?);
        let labels: BTreeMap<String, Vec<BigInt>> =
            self.label_map().into_iter().map(|(id, l)| (rename(&id), l)).collect();
        Self::new(poset, self.k, &labels, self.attestations)
    }

    /// Labels as primitive vectors, or `None` if some label is not primitive.
    pub fn primitive_labels(&self) -> Option<Vec<PrimitiveVector>> {
        self.labels.iter().map(|l| PrimitiveVector::new(l.clone()).ok()).collect()
    }

    pub fn has_zero_label(&self) -> bool {
        self.labels.iter().any(|l| l.iter().all(Zero::is_zero))
    }
}
