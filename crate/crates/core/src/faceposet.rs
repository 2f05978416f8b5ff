//! Face posets of nice manifolds with corners.
//!
//! A [`FacePoset`] is given by its faces (id and codimension) and its covering
//! relations. Faces are stored sorted by `(codim, id)`, so face indices are
//! themselves a linear extension of the reverse-inclusion order: a face always
//! comes before every face it contains.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::validity::{ValidityReport, Violation, ViolationKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PosetError {
    #[error("duplicate face id `{0}`")]
    DuplicateId(String),
    #[error("unknown face id `{0}`")]
    UnknownFace(String),
    #[error("empty face id")]
    EmptyId,
}

/// Finite face poset with codimension grading.
///
/// Covers are stored as `(lower, upper)`: `lower` is a codimension-one face of
/// `upper`'s closure, i.e. `lower ⊂ upper`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FacePoset {
    dim: usize,
    ids: Vec<String>,
    codims: Vec<usize>,
    index: BTreeMap<String, usize>,
    up: Vec<Vec<usize>>,
    down: Vec<Vec<usize>>,
    /// All faces containing a face, itself included.
    above: Vec<BTreeSet<usize>>,
    /// Facets containing a face (a facet contains itself).
    facets_of: Vec<Vec<usize>>,
    facets: Vec<usize>,
    facet_pos: Vec<Option<usize>>,
}

impl FacePoset {
    pub fn new<S: Into<String>>(
        dim: usize,
        faces: Vec<(S, usize)>,
        covers: Vec<(S, S)>,
    ) -> Result<Self, PosetError> {
        let mut faces: Vec<(String, usize)> = faces.into_iter().map(|(s, c)| (s.into(), c)).collect();
        let mut seen = BTreeSet::new();
        for (id, _) in &faces {
            if id.is_empty() {
                return Err(PosetError::EmptyId);
            }
            if !seen.insert(id.clone()) {
                return Err(PosetError::DuplicateId(id.clone()));
            }
        }
        faces.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));
        let index: BTreeMap<String, usize> =
            faces.iter().enumerate().map(|(i, (id, _))| (id.clone(), i)).collect();
        let n = faces.len();
        let mut up: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut down: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (lo, hi) in covers {
            let (lo, hi): (String, String) = (lo.into(), hi.into());
            let l = *index.get(&lo).ok_or(PosetError::UnknownFace(lo))?;
            let h = *index.get(&hi).ok_or(PosetError::UnknownFace(hi))?;
            up[l].insert(h);
            down[h].insert(l);
        }
        let up: Vec<Vec<usize>> = up.into_iter().map(|s| s.into_iter().collect()).collect();
        let down: Vec<Vec<usize>> = down.into_iter().map(|s| s.into_iter().collect()).collect();
        let codims: Vec<usize> = faces.iter().map(|f| f.1).collect();

        // reachability along upward covers; tolerant of ill-graded input
        let mut above = Vec::with_capacity(n);
        for start in 0..n {
            let mut seen = BTreeSet::from([start]);
            let mut stack = vec![start];
            while let Some(f) = stack.pop() {
                for &g in &up[f] {
                    if seen.insert(g) {
                        stack.push(g);
                    }
                }
            }
            above.push(seen);
        }
        let facets: Vec<usize> = (0..n).filter(|&i| codims[i] == 1).collect();
        let mut facet_pos = vec![None; n];
        for (p, &f) in facets.iter().enumerate() {
            facet_pos[f] = Some(p);
        }
        let facets_of = above
            .iter()
            .map(|a: &BTreeSet<usize>| a.iter().copied().filter(|&g| codims[g] == 1).collect())
            .collect();
        Ok(Self {
            dim,
            ids: faces.into_iter().map(|f| f.0).collect(),
            codims,
            index,
            up,
            down,
            above,
            facets_of,
            facets,
            facet_pos,
        })
    }

    /// Builds a poset whose faces are determined by their facet sets, as for
    /// simple polytopes. `faces` lists facet-index sets; the empty set is the
    /// top face and singletons are the facets themselves.
    pub fn from_facet_sets(dim: usize, facet_names: &[String], faces: &[BTreeSet<usize>]) -> Result<Self, PosetError> {
        let name = |s: &BTreeSet<usize>| -> String {
            if s.is_empty() {
                "P".to_string()
            } else {
                s.iter().map(|&i| facet_names[i].as_str()).collect::<Vec<_>>().join("^")
            }
        };
        let known: BTreeSet<&BTreeSet<usize>> = faces.iter().collect();
        let mut covers = Vec::new();
        for s in faces {
            for &i in s {
                let mut t = s.clone();
                t.remove(&i);
                if known.contains(&t) {
                    covers.push((name(s), name(&t)));
                }
            }
        }
        let faces = faces.iter().map(|s| (name(s), s.len())).collect();
        Self::new(dim, faces, covers)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn codim(&self, i: usize) -> usize {
        self.codims[i]
    }

    pub fn index_of(&self, id: &str) -> Result<usize, PosetError> {
        self.index.get(id).copied().ok_or_else(|| PosetError::UnknownFace(id.to_string()))
    }

    /// Faces covering face `i` (one codimension less).
    pub fn upper_covers(&self, i: usize) -> &[usize] {
        &self.up[i]
    }

    /// Faces covered by face `i` (one codimension more).
    pub fn lower_covers(&self, i: usize) -> &[usize] {
        &self.down[i]
    }

    /// Whether face `i` is contained in face `j` (reflexive).
    pub fn is_below(&self, i: usize, j: usize) -> bool {
        self.above[i].contains(&j)
    }

    pub fn faces_above(&self, i: usize) -> &BTreeSet<usize> {
        &self.above[i]
    }

    pub fn facet_indices(&self) -> &[usize] {
        &self.facets
    }

    /// Position of face `i` among the facets, if it is one.
    pub fn facet_position(&self, i: usize) -> Option<usize> {
        self.facet_pos[i]
    }

    pub fn facet_indices_containing(&self, i: usize) -> &[usize] {
        &self.facets_of[i]
    }

    pub fn cover_count(&self) -> usize {
        self.up.iter().map(Vec::len).sum()
    }

    /// All cover pairs `(lower, upper)` by index.
    pub fn cover_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.cover_count());
        for (l, ups) in self.up.iter().enumerate() {
            out.extend(ups.iter().map(|&u| (l, u)));
        }
        out
    }

    pub fn max_codim(&self) -> usize {
        self.codims.iter().copied().max().unwrap_or(0)
    }

    /// Number of faces of each codimension, from 0 to the maximum present.
    pub fn codim_profile(&self) -> Vec<usize> {
        let mut out = vec![0; self.max_codim() + 1];
        for &c in &self.codims {
            out[c] += 1;
        }
        out
    }

    pub fn facets(&self) -> Vec<&str> {
        self.facets.iter().map(|&i| self.id(i)).collect()
    }

    pub fn faces_of_codim(&self, n: usize) -> Vec<&str> {
        (0..self.len()).filter(|&i| self.codims[i] == n).map(|i| self.id(i)).collect()
    }

    pub fn facets_containing(&self, id: &str) -> Result<Vec<&str>, PosetError> {
        let i = self.index_of(id)?;
        Ok(self.facets_of[i].iter().map(|&f| self.id(f)).collect())
    }

    /// Faces ordered so that every face precedes the faces it contains, ties
    /// broken by `(codim, id)`.
    pub fn linear_extension(&self) -> Vec<&str> {
        self.ids.iter().map(String::as_str).collect()
    }

    /// Checks every structural invariant of a face poset of a nice manifold
    /// with corners.
    pub fn validate(&self) -> ValidityReport {
        let mut v = Vec::new();
        let tops: Vec<String> = (0..self.len()).filter(|&i| self.codims[i] == 0).map(|i| self.ids[i].clone()).collect();
        if tops.len() != 1 {
            v.push(Violation {
                kind: ViolationKind::TopCount,
                detail: format!("{} faces of codimension 0", tops.len()),
                faces: tops,
            });
        }
        for (l, u) in self.cover_pairs() {
            if self.codims[l] != self.codims[u] + 1 {
                v.push(Violation {
                    kind: ViolationKind::CoverNotGraded,
                    faces: vec![self.ids[l].clone(), self.ids[u].clone()],
                    detail: format!("cover joins codim {} to codim {}", self.codims[l], self.codims[u]),
                });
            }
        }
        for i in 0..self.len() {
            let n = self.codims[i];
            if n > self.dim {
                v.push(Violation {
                    kind: ViolationKind::CodimExceedsDim,
                    faces: vec![self.ids[i].clone()],
                    detail: format!("codim {n} exceeds dimension {}", self.dim),
                });
            }
            let fs = &self.facets_of[i];
            if fs.len() != n {
                v.push(Violation {
                    kind: ViolationKind::FacetCount,
                    faces: vec![self.ids[i].clone()],
                    detail: format!("codim {n} face lies in {} facets", fs.len()),
                });
                continue;
            }
            if let Err(detail) = self.check_boolean_interval(i) {
                v.push(Violation { kind: ViolationKind::IntervalNotBoolean, faces: vec![self.ids[i].clone()], detail });
            }
        }
        ValidityReport::from_violations(v)
    }

    fn check_boolean_interval(&self, i: usize) -> Result<(), String> {
        let n = self.codims[i];
        let interval = &self.above[i];
        if n >= usize::BITS as usize || interval.len() != 1usize << n {
            return Err(format!("upper interval has {} elements, expected 2^{n}", interval.len()));
        }
        let mut by_set: BTreeMap<&[usize], usize> = BTreeMap::new();
        for &g in interval {
            let fs = &self.facets_of[g];
            if fs.len() != self.codims[g] {
                return Err(format!("face `{}` has codim {} but lies in {} facets", self.ids[g], self.codims[g], fs.len()));
            }
            if let Some(&h) = by_set.get(fs.as_slice()) {
                return Err(format!("faces `{}` and `{}` share the same facets", self.ids[h], self.ids[g]));
            }
            by_set.insert(fs.as_slice(), g);
        }
        for &g in interval {
            for &h in interval {
                // g ⊆ h iff facets(g) ⊇ facets(h)
                let contains = self.facets_of[h].iter().all(|f| self.facets_of[g].contains(f));
                if self.is_below(g, h) != contains {
                    return Err(format!("order between `{}` and `{}` disagrees with facet inclusion", self.ids[g], self.ids[h]));
                }
            }
        }
        Ok(())
    }

    /// Copy of the poset with every face id passed through `rename`.
    pub fn renamed(&self, rename: impl Fn(&str) -> String) -> Result<Self, PosetError> {
        let faces = (0..self.len()).map(|i| (rename(&self.ids[i]), self.codims[i])).collect();
        let covers = self
            .cover_pairs()
            .into_iter()
            .map(|(l, u)| (rename(&self.ids[l]), rename(&self.ids[u])))
            .collect();
        Self::new(self.dim, faces, covers)
    }

    /// Face ids and covers in canonical order, for serialization.
    pub fn faces_and_covers(&self) -> (Vec<(String, usize)>, Vec<(String, String)>) {
        let faces = (0..self.len()).map(|i| (self.ids[i].clone(), self.codims[i])).collect();
        let mut covers: Vec<(String, String)> = self
            .cover_pairs()
            .into_iter()
            .map(|(l, u)| (self.ids[l].clone(), self.ids[u].clone()))
            .collect();
        covers.sort();
        (faces, covers)
    }
}

/// Standard face posets.
pub mod shapes {
    use super::*;

    fn facet_names(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("f{i}")).collect()
    }

    /// The `n`-simplex: `n + 1` facets, any `≤ n` of them meet.
    pub fn simplex(n: usize) -> FacePoset {
        let m = n + 1;
        let faces: Vec<BTreeSet<usize>> = (0u32..1 << m)
            .filter(|mask| (mask.count_ones() as usize) <= n)
            .map(|mask| (0..m).filter(|i| mask >> i & 1 == 1).collect())
            .collect();
        FacePoset::from_facet_sets(n, &facet_names(m), &faces).expect("simplex is well formed")
    }

    /// The `n`-cube: facets `f{2i}` and `f{2i+1}` are opposite.
    pub fn cube(n: usize) -> FacePoset {
        let mut faces = vec![BTreeSet::new()];
        for axis in 0..n {
            let mut next = Vec::with_capacity(faces.len() * 3);
            for s in &faces {
                next.push(s.clone());
                for side in 0..2 {
                    let mut t = s.clone();
                    t.insert(2 * axis + side);
                    next.push(t);
                }
            }
            faces = next;
        }
        FacePoset::from_facet_sets(n, &facet_names(2 * n), &faces).expect("cube is well formed")
    }

    /// The `m`-gon, `m ≥ 3`, with facets in cyclic order.
    pub fn polygon(m: usize) -> FacePoset {
        assert!(m >= 3, "a polygon needs at least three edges");
        let mut faces = vec![BTreeSet::new()];
        faces.extend((0..m).map(|i| BTreeSet::from([i])));
        faces.extend((0..m).map(|i| BTreeSet::from([i, (i + 1) % m])));
        FacePoset::from_facet_sets(2, &facet_names(m), &faces).expect("polygon is well formed")
    }

    /// The orthant ℝ^n_{≥0}: a single vertex where `n` facets meet.
    pub fn orthant(n: usize) -> FacePoset {
        let faces: Vec<BTreeSet<usize>> = (0u32..1 << n).map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).collect()).collect();
        FacePoset::from_facet_sets(n, &facet_names(n), &faces).expect("orthant is well formed")
    }

    /// The closed half-plane ℝ_{≥0} × ℝ: top face and one facet.
    pub fn half_plane() -> FacePoset {
        FacePoset::new(2, vec![("P", 0), ("f0", 1)], vec![("f0", "P")]).expect("half-plane is well formed")
    }

    /// A manifold without boundary of dimension `d`: the top face alone.
    pub fn point_like(d: usize) -> FacePoset {
        FacePoset::new(d, vec![("P", 0)], Vec::<(&str, &str)>::new()).expect("single face")
    }

    /// Product of two face posets; face ids are `a|b`.
    pub fn product(a: &FacePoset, b: &FacePoset) -> FacePoset {
        let name = |i: usize, j: usize| format!("{}|{}", a.id(i), b.id(j));
        let mut faces = Vec::with_capacity(a.len() * b.len());
        let mut covers = Vec::new();
        for i in 0..a.len() {
            for j in 0..b.len() {
                faces.push((name(i, j), a.codim(i) + b.codim(j)));
                for &u in a.upper_covers(i) {
                    covers.push((name(i, j), name(u, j)));
                }
                for &u in b.upper_covers(j) {
                    covers.push((name(i, j), name(i, u)));
                }
            }
        }
        FacePoset::new(a.dim() + b.dim(), faces, covers).expect("product of well-formed posets")
    }
}
