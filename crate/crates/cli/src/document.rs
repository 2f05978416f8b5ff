//! On-disk JSON format for characteristic pairs and reports.
//!
//! Serialization is canonical: keys sorted, faces ordered by `(codim, id)`,
//! covers sorted, two-space indentation, LF line endings and a final newline.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use torclass_core::charpair::{Attestations, CharError, CharacteristicPair};
use torclass_core::faceposet::{FacePoset, PosetError};
use torclass_core::lattice::IntMatrix;

/// Version stamped into every report.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("document has no `k`")]
    MissingRank,
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error(transparent)]
    Char(#[from] CharError),
    #[error("label of `{0}` has an entry outside the 64-bit range")]
    LabelOverflow(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceEntry {
    pub id: String,
    pub codim: usize,
}

/// A face poset with facet labels. `k` and `lambda` may be omitted when the
/// document only describes a poset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub dim_orbit: usize,
    pub faces: Vec<FaceEntry>,
    #[serde(default)]
    pub covers: Vec<(String, String)>,
    #[serde(default)]
    pub lambda: BTreeMap<String, Vec<i64>>,
    #[serde(default)]
    pub attestations: Attestations,
}

impl PairDocument {
    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        serde_json::from_str(text).map_err(|e| DocumentError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self, DocumentError> {
        Self::parse(&read_text(path)?)
    }

    pub fn from_poset(poset: &FacePoset) -> Self {
        let (faces, covers) = poset.faces_and_covers();
        Self {
            k: None,
            dim_orbit: poset.dim(),
            faces: faces.into_iter().map(|(id, codim)| FaceEntry { id, codim }).collect(),
            covers,
            lambda: BTreeMap::new(),
            attestations: Attestations::default(),
        }
    }

    pub fn from_pair(cp: &CharacteristicPair) -> Result<Self, DocumentError> {
        let mut doc = Self::from_poset(cp.poset());
        doc.k = Some(cp.k());
        doc.attestations = *cp.attestations();
        for (id, label) in cp.label_map() {
            let entries = label.iter().map(|x| x.to_i64()).collect::<Option<Vec<_>>>();
            doc.lambda.insert(id.clone(), entries.ok_or(DocumentError::LabelOverflow(id))?);
        }
        Ok(doc)
    }

    pub fn to_poset(&self) -> Result<FacePoset, DocumentError> {
        let faces = self.faces.iter().map(|f| (f.id.clone(), f.codim)).collect();
        Ok(FacePoset::new(self.dim_orbit, faces, self.covers.clone())?)
    }

    pub fn to_pair(&self) -> Result<CharacteristicPair, DocumentError> {
        let k = self.k.ok_or(DocumentError::MissingRank)?;
        let poset = Arc::new(self.to_poset()?);
        let labels: BTreeMap<String, Vec<BigInt>> = self
            .lambda
            .iter()
            .map(|(id, v)| (id.clone(), v.iter().map(|&x| BigInt::from(x)).collect()))
            .collect();
        Ok(CharacteristicPair::new(poset, k, &labels, self.attestations)?)
    }

    /// Faces and covers sorted as in the canonical serialization.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        out.faces.sort_by(|a, b| (a.codim, &a.id).cmp(&(b.codim, &b.id)));
        out.covers.sort();
        out
    }

    pub fn to_canonical_json(&self) -> String {
        canonical_json(&self.normalized())
    }
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn canonical_json(value: &impl Serialize) -> String {
    // Value's map type is ordered by key
    let v = serde_json::to_value(value).expect("serializable");
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

pub fn read_text(path: &Path) -> Result<String, DocumentError> {
    std::fs::read_to_string(path).map_err(|source| DocumentError::Io { path: path.display().to_string(), source })
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), DocumentError> {
    let io = |source| DocumentError::Io { path: path.display().to_string(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Integers that fit in 64 bits become JSON numbers, larger ones strings.
pub fn bigint_json(x: &BigInt) -> serde_json::Value {
    match x.to_i64() {
        Some(v) => v.into(),
        None => x.to_string().into(),
    }
}

pub fn matrix_json(m: &IntMatrix) -> serde_json::Value {
    let rows: Vec<serde_json::Value> =
        m.row_vecs().iter().map(|r| serde_json::Value::Array(r.iter().map(bigint_json).collect())).collect();
    rows.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use torclass_core::faceposet::shapes;

    #[test]
    fn round_trip_is_byte_identical() {
        let cp = CharacteristicPair::from_i64_labels(Arc::new(shapes::simplex(2)), 2, &[&[1, 0], &[0, 1], &[1, 1]])
            .unwrap();
        let text = PairDocument::from_pair(&cp).unwrap().to_canonical_json();
        let again = PairDocument::parse(&text).unwrap();
        assert_eq!(again.to_canonical_json(), text);
        assert_eq!(again.to_pair().unwrap(), cp);
        assert!(text.ends_with("}\n"));
        assert!(!text.contains(" \n"));
    }

    #[test]
    fn parse_errors_carry_position() {
        match PairDocument::parse("{\n  \"k\": 2,\n  oops\n}") {
            Err(DocumentError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(PairDocument::parse("{\"dim_orbit\": 1, \"faces\": [], \"extra\": 1}"), Err(DocumentError::Parse { .. })));
    }

    #[test]
    fn missing_rank() {
        let doc = PairDocument::from_poset(&shapes::simplex(1));
        assert!(matches!(doc.to_pair(), Err(DocumentError::MissingRank)));
        assert!(doc.to_poset().is_ok());
    }
}
