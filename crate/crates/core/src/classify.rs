//! Equivalence of characteristic pairs.
//!
//! Two pairs are *strongly* equivalent when a poset isomorphism carries every
//! facet label to the identical label, and *weakly* equivalent when this holds
//! after an automorphism `A ∈ GL(k, ℤ)` of the torus. Deciders return an
//! [`IsoWitness`] that [`verify_witness`] rechecks from scratch.
//!
//! The search colours the faces (plus one node per distinct label) by iterated
//! refinement, then backtracks facet by facet. Deeper faces are matched last,
//! through their upper covers. Canonical forms use the same refinement with
//! individualization and keep the least serialization over all leaves.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charpair::{Attestations, CharacteristicPair};
use crate::lattice::{
    canonical_sign, format_vector, hnf, smith_decomposition, unimodular_candidates, IntMatrix, PrimitiveVector,
};

/// Largest poset accepted by [`canonical_form`].
pub const CANONICAL_FACE_LIMIT: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Strong,
    Weak,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strong" => Ok(Mode::Strong),
            "weak" => Ok(Mode::Weak),
            other => Err(format!("unknown mode `{other}` (expected strong or weak)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("pair {which} is not a valid characteristic pair: {detail}")]
    InvalidPair { which: &'static str, detail: String },
    #[error("no canonical form for posets with more than {limit} faces (got {faces})")]
    TooLarge { faces: usize, limit: usize },
    #[error("search produced a witness that failed verification: {0}")]
    WitnessRejected(String),
}

/// A poset isomorphism, plus the torus automorphism in weak mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsoWitness {
    pub phi: BTreeMap<String, String>,
    pub auto: Option<IntMatrix>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    /// Attested hypotheses give an equivariant diffeomorphism.
    EquivariantlyDiffeomorphic,
    /// Attested hypotheses give an equivariant diffeomorphism up to an
    /// automorphism of the torus.
    WeaklyEquivariantlyDiffeomorphic,
    /// Only the combinatorial data are known to agree.
    CombinatorialOnly,
    NotEquivalent,
}

/// What the verdict licenses, given the attestations of both pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Justification {
    pub attestations: Attestations,
    pub conclusion: Conclusion,
    pub statement: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub equivalent: bool,
    pub mode: Mode,
    pub witness: Option<IsoWitness>,
    pub justification: Justification,
    /// Why the pairs are not equivalent, when they are not.
    pub reason: Option<String>,
    /// In weak mode: whether the automorphism is determined by the labels
    /// (false when the labels do not span ℚ^k).
    pub auto_unique: Option<bool>,
}

fn justify(a: &CharacteristicPair, b: &CharacteristicPair, mode: Mode, equivalent: bool) -> Justification {
    let att = a.attestations().both(b.attestations());
    if !equivalent {
        return Justification {
            attestations: att,
            conclusion: Conclusion::NotEquivalent,
            statement: "no isomorphism of face posets matches the characteristic functions".into(),
        };
    }
    let twist = match mode {
        Mode::Strong => "",
        Mode::Weak => " after an automorphism of the torus",
    };
    if att.faces_contractible && att.four_faces_matched {
        let conclusion = match mode {
            Mode::Strong => Conclusion::EquivariantlyDiffeomorphic,
            Mode::Weak => Conclusion::WeaklyEquivariantlyDiffeomorphic,
        };
        return Justification {
            attestations: att,
            conclusion,
            statement: format!(
                "face posets are isomorphic with matching characteristic functions{twist}; closed faces are \
                 contractible and matched four-dimensional faces are diffeomorphic after smoothing corners, \
                 so the manifolds are equivariantly diffeomorphic{twist}"
            ),
        };
    }
    let statement = if att.sections_exist {
        format!(
            "face posets are isomorphic with matching characteristic functions{twist}; sections to the orbit \
             maps are attested, so any diffeomorphism of orbit spaces inducing this isomorphism lifts to an \
             equivariant diffeomorphism{twist}"
        )
    } else {
        format!(
            "face posets are isomorphic with matching characteristic functions{twist}; no geometric conclusion \
             without attested sections or contractible faces with matched four-dimensional faces"
        )
    };
    Justification { attestations: att, conclusion: Conclusion::CombinatorialOnly, statement }
}

fn not_equivalent(a: &CharacteristicPair, b: &CharacteristicPair, mode: Mode, reason: impl Into<String>) -> Verdict {
    Verdict {
        equivalent: false,
        mode,
        witness: None,
        justification: justify(a, b, mode, false),
        reason: Some(reason.into()),
        auto_unique: None,
    }
}

fn require_valid(cp: &CharacteristicPair, which: &'static str) -> Result<(), ClassifyError> {
    let report = cp.validate();
    if report.is_valid() {
        return Ok(());
    }
    let detail = report
        .violations
        .iter()
        .map(|v| format!("{:?} at [{}]", v.kind, v.faces.join(",")))
        .collect::<Vec<_>>()
        .join("; ");
    Err(ClassifyError::InvalidPair { which, detail })
}

// ---------------------------------------------------------------------------
// Colour refinement
// ---------------------------------------------------------------------------

const EDGE_UP: u8 = 0;
const EDGE_DOWN: u8 = 1;
const EDGE_LABEL: u8 = 2;

/// Faces followed by one node per distinct facet label.
struct LabelGraph {
    faces: usize,
    adj: Vec<Vec<(u8, usize)>>,
    init: Vec<u64>,
}

impl LabelGraph {
    /// `label_colour` maps a label to its initial colour; weak mode passes a
    /// constant so only the equality pattern of labels is seen.
    fn build(cp: &CharacteristicPair, label_colour: impl Fn(&[BigInt]) -> u64) -> Self {
        let p = cp.poset();
        let n = p.len();
        let mut distinct: Vec<&Vec<BigInt>> = cp.labels().iter().collect();
        distinct.sort();
        distinct.dedup();
        let mut adj: Vec<Vec<(u8, usize)>> = vec![Vec::new(); n + distinct.len()];
        let mut init: Vec<u64> = (0..n).map(|i| p.codim(i) as u64).collect();
        for l in &distinct {
            init.push((1 << 32) | label_colour(l));
        }
        for i in 0..n {
            for &u in p.upper_covers(i) {
                adj[i].push((EDGE_UP, u));
                adj[u].push((EDGE_DOWN, i));
            }
        }
        for (pos, &f) in p.facet_indices().iter().enumerate() {
            let node = n + distinct.binary_search(&&cp.labels()[pos]).expect("label present");
            adj[f].push((EDGE_LABEL, node));
            adj[node].push((EDGE_LABEL, f));
        }
        Self { faces: n, adj, init }
    }
}

/// Ranks `keys` densely, in sorted order.
fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<u32> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter().map(|k| sorted.binary_search(k).expect("present") as u32).collect()
}

/// Iterated neighbourhood refinement to a stable colouring.
fn refine(adj: &[Vec<(u8, usize)>], colours: &mut Vec<u32>) {
    let mut count = colours.iter().collect::<BTreeSet<_>>().len();
    loop {
        let sigs: Vec<(u32, Vec<(u8, u32)>)> = (0..adj.len())
            .map(|v| {
                let mut nb: Vec<(u8, u32)> = adj[v].iter().map(|&(t, u)| (t, colours[u])).collect();
                nb.sort_unstable();
                (colours[v], nb)
            })
            .collect();
        let next = dense_ranks(&sigs);
        let next_count = next.iter().collect::<BTreeSet<_>>().len();
        *colours = next;
        if next_count == count {
            return;
        }
        count = next_count;
    }
}

fn histogram(colours: &[u32]) -> BTreeMap<u32, usize> {
    let mut h = BTreeMap::new();
    for &c in colours {
        *h.entry(c).or_insert(0) += 1;
    }
    h
}

// ---------------------------------------------------------------------------
// Deciders
// ---------------------------------------------------------------------------

/// For every pair of facets, the number of faces lying in both.
fn facet_meets(cp: &CharacteristicPair) -> Vec<Vec<u32>> {
    let p = cp.poset();
    let m = p.facet_indices().len();
    let mut meets = vec![vec![0u32; m]; m];
    for i in 0..p.len() {
        let fs = p.facet_indices_containing(i);
        for (x, &f) in fs.iter().enumerate() {
            for &g in &fs[x + 1..] {
                let (pf, pg) = (p.facet_position(f).unwrap(), p.facet_position(g).unwrap());
                meets[pf][pg] += 1;
                meets[pg][pf] += 1;
            }
        }
    }
    meets
}

fn label_classes(cp: &CharacteristicPair) -> Vec<usize> {
    let mut distinct: Vec<&Vec<BigInt>> = cp.labels().iter().collect();
    distinct.sort();
    distinct.dedup();
    cp.labels().iter().map(|l| distinct.binary_search(&l).unwrap()).collect()
}

fn label_rank(cp: &CharacteristicPair) -> usize {
    if cp.labels().is_empty() {
        return 0;
    }
    let m = IntMatrix::from_rows(cp.k(), cp.labels().to_vec()).expect("labels have length k");
    crate::lattice::snf_diagonal(&m).iter().filter(|d| !d.is_zero()).count()
}

fn apply_canonical(a: &IntMatrix, v: &[BigInt]) -> Vec<BigInt> {
    let mut img = a.apply(v).expect("square automorphism");
    canonical_sign(&mut img);
    img
}

struct Search<'a> {
    a: &'a CharacteristicPair,
    b: &'a CharacteristicPair,
    mode: Mode,
    colour_a: Vec<u32>,
    colour_b: Vec<u32>,
    meets_a: Vec<Vec<u32>>,
    meets_b: Vec<Vec<u32>>,
    class_a: Vec<usize>,
    class_b: Vec<usize>,
    prim_a: Vec<PrimitiveVector>,
    prim_b: Vec<PrimitiveVector>,
    rank: usize,
    /// Facet positions of `a` in search order.
    facet_order: Vec<usize>,
    /// Non-facet, non-top faces of `a` in search order.
    deep_order: Vec<usize>,
    // state
    phi: Vec<Option<usize>>,
    used: Vec<bool>,
    /// facet position in a -> facet position in b
    facet_map: Vec<Option<usize>>,
    class_fwd: HashMap<usize, usize>,
    class_bwd: HashMap<usize, usize>,
    auto: Option<IntMatrix>,
}

impl<'a> Search<'a> {
    fn facet_candidates(&self, pa: usize) -> Vec<usize> {
        let pb_all = self.b.poset().facet_indices();
        let fa = self.a.poset().facet_indices()[pa];
        let mut out = Vec::new();
        for (pb, &fb) in pb_all.iter().enumerate() {
            if self.used[fb] || self.colour_a[fa] != self.colour_b[fb] {
                continue;
            }
            let meets_ok = self.facet_order.iter().filter_map(|&qa| self.facet_map[qa].map(|qb| (qa, qb))).all(
                |(qa, qb)| self.meets_a[pa][qa] == self.meets_b[pb][qb],
            );
            if !meets_ok {
                continue;
            }
            let labels_ok = match self.mode {
                Mode::Strong => self.a.labels()[pa] == self.b.labels()[pb],
                Mode::Weak => {
                    let (ca, cb) = (self.class_a[pa], self.class_b[pb]);
                    let classes_ok = self.class_fwd.get(&ca).is_none_or(|&x| x == cb)
                        && self.class_bwd.get(&cb).is_none_or(|&x| x == ca);
                    classes_ok
                        && self
                            .auto
                            .as_ref()
                            .is_none_or(|a| apply_canonical(a, &self.a.labels()[pa]) == self.b.labels()[pb])
                }
            };
            if labels_ok {
                out.push(pb);
            }
        }
        out
    }

    fn assign(&mut self, fa: usize, fb: usize) {
        self.phi[fa] = Some(fb);
        self.used[fb] = true;
    }

    fn unassign(&mut self, fa: usize, fb: usize) {
        self.phi[fa] = None;
        self.used[fb] = false;
    }

    fn search_facets(&mut self, depth: usize, assigned_rank: usize) -> Option<()> {
        if depth == self.facet_order.len() {
            return self.search_deep(0);
        }
        let pa = self.facet_order[depth];
        let fa = self.a.poset().facet_indices()[pa];
        for pb in self.facet_candidates(pa) {
            let fb = self.b.poset().facet_indices()[pb];
            self.assign(fa, fb);
            self.facet_map[pa] = Some(pb);
            let (ca, cb) = (self.class_a[pa], self.class_b[pb]);
            let fresh_class = !self.class_fwd.contains_key(&ca);
            if fresh_class {
                self.class_fwd.insert(ca, cb);
                self.class_bwd.insert(cb, ca);
            }
            let found = if self.mode == Mode::Weak && self.auto.is_none() {
                let placed: Vec<usize> = self.facet_order[..=depth].to_vec();
                let src: Vec<Vec<BigInt>> = placed.iter().map(|&q| self.a.labels()[q].clone()).collect();
                let rank = rank_of(self.a.k(), &src);
                if rank == self.rank && rank > assigned_rank {
                    let s: Vec<PrimitiveVector> = placed.iter().map(|&q| self.prim_a[q].clone()).collect();
                    let d: Vec<PrimitiveVector> =
                        placed.iter().map(|&q| self.prim_b[self.facet_map[q].unwrap()].clone()).collect();
                    let cands = unimodular_candidates(&s, &d, self.a.k()).unwrap_or_default();
                    let mut hit = None;
                    for a in cands {
                        self.auto = Some(a);
                        if self.search_facets(depth + 1, rank).is_some() {
                            hit = Some(());
                            break;
                        }
                        self.auto = None;
                    }
                    hit
                } else {
                    self.search_facets(depth + 1, rank)
                }
            } else {
                self.search_facets(depth + 1, assigned_rank)
            };
            if found.is_some() {
                return found;
            }
            if fresh_class {
                self.class_fwd.remove(&ca);
                self.class_bwd.remove(&cb);
            }
            self.facet_map[pa] = None;
            self.unassign(fa, fb);
        }
        None
    }

    fn search_deep(&mut self, depth: usize) -> Option<()> {
        if depth == self.deep_order.len() {
            return Some(());
        }
        let fa = self.deep_order[depth];
        let pa = self.a.poset();
        let pb = self.b.poset();
        let ups: BTreeSet<usize> = pa.upper_covers(fa).iter().map(|&u| self.phi[u].expect("covers assigned first")).collect();
        let Some(&first) = ups.iter().next() else { return None };
        let cands: Vec<usize> = pb
            .lower_covers(first)
            .iter()
            .copied()
            .filter(|&g| {
                !self.used[g]
                    && self.colour_a[fa] == self.colour_b[g]
                    && pb.upper_covers(g).len() == ups.len()
                    && pb.upper_covers(g).iter().all(|u| ups.contains(u))
            })
            .collect();
        for g in cands {
            self.assign(fa, g);
            if self.search_deep(depth + 1).is_some() {
                return Some(());
            }
            self.unassign(fa, g);
        }
        None
    }
}

fn rank_of(k: usize, rows: &[Vec<BigInt>]) -> usize {
    let m = IntMatrix::from_rows(k, rows.to_vec()).expect("rows of length k");
    crate::lattice::snf_diagonal(&m).iter().filter(|d| !d.is_zero()).count()
}

fn sorted_labels(cp: &CharacteristicPair) -> Vec<Vec<BigInt>> {
    let mut v = cp.labels().to_vec();
    v.sort();
    v
}

fn class_sizes(classes: &[usize]) -> Vec<usize> {
    let mut h: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in classes {
        *h.entry(c).or_insert(0) += 1;
    }
    let mut sizes: Vec<usize> = h.into_values().collect();
    sizes.sort();
    sizes
}

fn decide(a: &CharacteristicPair, b: &CharacteristicPair, mode: Mode) -> Result<Verdict, ClassifyError> {
    require_valid(a, "a")?;
    require_valid(b, "b")?;
    if a.k() != b.k() {
        return Ok(not_equivalent(a, b, mode, "k differs"));
    }
    if a.dim_orbit() != b.dim_orbit() {
        return Ok(not_equivalent(a, b, mode, "orbit space dimension differs"));
    }
    let (pa, pb) = (a.poset(), b.poset());
    if pa.codim_profile() != pb.codim_profile() {
        return Ok(not_equivalent(a, b, mode, "face counts per codimension differ"));
    }
    if pa.cover_count() != pb.cover_count() {
        return Ok(not_equivalent(a, b, mode, "cover counts differ"));
    }
    let (class_a, class_b) = (label_classes(a), label_classes(b));
    match mode {
        Mode::Strong => {
            if sorted_labels(a) != sorted_labels(b) {
                return Ok(not_equivalent(a, b, mode, "facet label multisets differ"));
            }
        }
        Mode::Weak => {
            if class_sizes(&class_a) != class_sizes(&class_b) {
                return Ok(not_equivalent(a, b, mode, "label multiplicity patterns differ"));
            }
        }
    }
    let rank = label_rank(a);
    if mode == Mode::Weak && rank != label_rank(b) {
        return Ok(not_equivalent(a, b, mode, "facet labels span lattices of different rank"));
    }

    // joint refinement so that colours are comparable across the two pairs
    let mut all_labels: Vec<Vec<BigInt>> = a.labels().iter().chain(b.labels()).cloned().collect();
    all_labels.sort();
    all_labels.dedup();
    let colour_of = |l: &[BigInt]| -> u64 {
        match mode {
            Mode::Strong => all_labels.binary_search_by(|x| x.as_slice().cmp(l)).unwrap() as u64,
            Mode::Weak => 0,
        }
    };
    let ga = LabelGraph::build(a, colour_of);
    let gb = LabelGraph::build(b, colour_of);
    let na = ga.adj.len();
    let mut adj = ga.adj.clone();
    adj.extend(gb.adj.iter().map(|nb| nb.iter().map(|&(t, u)| (t, u + na)).collect::<Vec<_>>()));
    let init: Vec<u64> = ga.init.iter().chain(&gb.init).copied().collect();
    let mut colours = dense_ranks(&init);
    refine(&adj, &mut colours);
    let colour_a = colours[..ga.faces].to_vec();
    let colour_b = colours[na..na + gb.faces].to_vec();
    if histogram(&colours[..na]) != histogram(&colours[na..]) {
        return Ok(not_equivalent(a, b, mode, "colour refinement separates the pairs"));
    }

    let meets_a = facet_meets(a);
    let facet_order = facet_search_order(a, mode, &meets_a);
    let top_a = (0..pa.len()).find(|&i| pa.codim(i) == 0).expect("valid poset has a top face");
    let top_b = (0..pb.len()).find(|&i| pb.codim(i) == 0).expect("valid poset has a top face");
    let deep_order: Vec<usize> = (0..pa.len()).filter(|&i| pa.codim(i) >= 2).collect();
    let prims = |cp: &CharacteristicPair| cp.primitive_labels().expect("valid pairs have primitive labels");

    let mut s = Search {
        a,
        b,
        mode,
        colour_a,
        colour_b,
        meets_a,
        meets_b: facet_meets(b),
        class_a,
        class_b,
        prim_a: prims(a),
        prim_b: prims(b),
        rank,
        facet_order,
        deep_order,
        phi: vec![None; pa.len()],
        used: vec![false; pb.len()],
        facet_map: vec![None; pa.facet_indices().len()],
        class_fwd: HashMap::new(),
        class_bwd: HashMap::new(),
        auto: None,
    };
    s.assign(top_a, top_b);
    if s.search_facets(0, 0).is_none() {
        return Ok(not_equivalent(a, b, mode, "no isomorphism of face posets matches the labels"));
    }
    let phi: BTreeMap<String, String> = (0..pa.len())
        .map(|i| (pa.id(i).to_string(), pb.id(s.phi[i].expect("complete")).to_string()))
        .collect();
    let auto = match mode {
        Mode::Strong => None,
        Mode::Weak => Some(s.auto.clone().unwrap_or_else(|| IntMatrix::identity(a.k()))),
    };
    let witness = IsoWitness { phi, auto };
    verify_witness(a, b, &witness, mode).map_err(ClassifyError::WitnessRejected)?;
    Ok(Verdict {
        equivalent: true,
        mode,
        witness: Some(witness),
        justification: justify(a, b, mode, true),
        reason: None,
        auto_unique: match mode {
            Mode::Strong => None,
            Mode::Weak => Some(rank == a.k()),
        },
    })
}

/// Facets ordered by `(label, degree, id)`, then reordered so that each facet
/// meets an earlier one where possible. Weak mode starts from the facets
/// through a deepest face, whose labels pin down the automorphism.
fn facet_search_order(cp: &CharacteristicPair, mode: Mode, meets: &[Vec<u32>]) -> Vec<usize> {
    let p = cp.poset();
    let facets = p.facet_indices();
    let mut base: Vec<usize> = (0..facets.len()).collect();
    base.sort_by(|&x, &y| {
        let key = |q: usize| {
            let label = match mode {
                Mode::Strong => format_vector(&cp.labels()[q]),
                Mode::Weak => String::new(),
            };
            (label, p.lower_covers(facets[q]).len(), p.id(facets[q]).to_string())
        };
        key(x).cmp(&key(y))
    });
    let mut order: Vec<usize> = Vec::with_capacity(base.len());
    if mode == Mode::Weak && !base.is_empty() {
        let deepest = p.max_codim();
        let anchor = (0..p.len()).find(|&i| p.codim(i) == deepest).expect("nonempty");
        for &q in &base {
            if p.facet_indices_containing(anchor).contains(&facets[q]) {
                order.push(q);
            }
        }
    }
    while order.len() < base.len() {
        let next = base
            .iter()
            .copied()
            .filter(|q| !order.contains(q))
            .find(|&q| order.iter().any(|&o| meets[q][o] > 0))
            .or_else(|| base.iter().copied().find(|q| !order.contains(q)))
            .expect("remaining facet");
        order.push(next);
    }
    order
}

/// Decides whether a poset isomorphism matches the facet labels exactly.
pub fn strong_equivalence(a: &CharacteristicPair, b: &CharacteristicPair) -> Result<Verdict, ClassifyError> {
    decide(a, b, Mode::Strong)
}

/// Decides whether a poset isomorphism matches the facet labels up to an
/// automorphism of the torus.
pub fn weak_equivalence(a: &CharacteristicPair, b: &CharacteristicPair) -> Result<Verdict, ClassifyError> {
    decide(a, b, Mode::Weak)
}

pub fn equivalence(a: &CharacteristicPair, b: &CharacteristicPair, mode: Mode) -> Result<Verdict, ClassifyError> {
    decide(a, b, mode)
}

/// Rechecks a witness from the raw data: `phi` must be a codimension- and
/// cover-preserving bijection, and the facet labels must agree under it (after
/// applying `auto` in weak mode).
pub fn verify_witness(a: &CharacteristicPair, b: &CharacteristicPair, w: &IsoWitness, mode: Mode) -> Result<(), String> {
    if a.k() != b.k() {
        return Err("torus ranks differ".into());
    }
    if a.dim_orbit() != b.dim_orbit() {
        return Err("orbit dimensions differ".into());
    }
    let (pa, pb) = (a.poset(), b.poset());
    if w.phi.len() != pa.len() || pa.len() != pb.len() {
        return Err("phi does not cover every face".into());
    }
    let mut image = BTreeSet::new();
    let mut map = vec![0usize; pa.len()];
    for (src, dst) in &w.phi {
        let i = pa.index_of(src).map_err(|e| format!("phi domain: {e}"))?;
        let j = pb.index_of(dst).map_err(|e| format!("phi image: {e}"))?;
        if !image.insert(j) {
            return Err(format!("phi is not injective at `{dst}`"));
        }
        if pa.codim(i) != pb.codim(j) {
            return Err(format!("phi changes the codimension of `{src}`"));
        }
        map[i] = j;
    }
    let mapped: BTreeSet<(usize, usize)> = pa.cover_pairs().into_iter().map(|(l, u)| (map[l], map[u])).collect();
    let target: BTreeSet<(usize, usize)> = pb.cover_pairs().into_iter().collect();
    if mapped != target {
        return Err("phi does not preserve covering relations".into());
    }
    let auto = match (mode, &w.auto) {
        (Mode::Strong, None) => None,
        (Mode::Strong, Some(_)) => return Err("strong witness carries an automorphism".into()),
        (Mode::Weak, None) => return Err("weak witness lacks an automorphism".into()),
        (Mode::Weak, Some(m)) => {
            if m.nrows() != a.k() || m.ncols() != a.k() {
                return Err("automorphism has the wrong shape".into());
            }
            let det = m.determinant().map_err(|e| e.to_string())?;
            if det.abs() != BigInt::one() {
                return Err(format!("automorphism has determinant {det}"));
            }
            Some(m)
        }
    };
    for &f in pa.facet_indices() {
        let la = a.facet_label(f).expect("facet");
        let lb = b.facet_label(map[f]).expect("facets map to facets");
        let img = match auto {
            None => la.to_vec(),
            Some(m) => apply_canonical(m, la),
        };
        if img != lb {
            return Err(format!(
                "label of `{}` maps to {} but `{}` carries {}",
                pa.id(f),
                format_vector(&img),
                pb.id(map[f]),
                format_vector(lb)
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Canonical forms
// ---------------------------------------------------------------------------

/// A string that two pairs share exactly when they are equivalent in `mode`.
pub fn canonical_form(cp: &CharacteristicPair, mode: Mode) -> Result<String, ClassifyError> {
    require_valid(cp, "input")?;
    let n = cp.poset().len();
    if n > CANONICAL_FACE_LIMIT {
        return Err(ClassifyError::TooLarge { faces: n, limit: CANONICAL_FACE_LIMIT });
    }
    let mut own: Vec<&Vec<BigInt>> = cp.labels().iter().collect();
    own.sort();
    own.dedup();
    let g = LabelGraph::build(cp, |l| match mode {
        Mode::Strong => own.binary_search_by(|x| x.as_slice().cmp(l)).unwrap() as u64,
        Mode::Weak => 0,
    });
    let mut colours = dense_ranks(&g.init);
    refine(&g.adj, &mut colours);
    let mut best: Option<String> = None;
    canon_search(cp, mode, &g, colours, &mut best);
    let body = best.expect("at least one leaf");
    let tag = match mode {
        Mode::Strong => "strong",
        Mode::Weak => "weak",
    };
    Ok(format!("{tag};k={};d={};{body}", cp.k(), cp.dim_orbit()))
}

fn canon_search(cp: &CharacteristicPair, mode: Mode, g: &LabelGraph, colours: Vec<u32>, best: &mut Option<String>) {
    let face_hist = histogram(&colours[..g.faces]);
    let target = face_hist.iter().find(|(_, &n)| n > 1).map(|(&c, _)| c);
    let Some(target) = target else {
        let s = serialize_leaf(cp, mode, &colours[..g.faces]);
        if best.as_ref().is_none_or(|b| s < *b) {
            *best = Some(s);
        }
        return;
    };
    for v in 0..g.faces {
        if colours[v] != target {
            continue;
        }
        let mut next: Vec<u32> = colours.iter().map(|&c| 2 * c + 1).collect();
        next[v] = 2 * colours[v];
        let mut next = dense_ranks(&next);
        refine(&g.adj, &mut next);
        canon_search(cp, mode, g, next, best);
    }
}

fn serialize_leaf(cp: &CharacteristicPair, mode: Mode, colours: &[u32]) -> String {
    let p = cp.poset();
    // discrete colouring: position of each face is its colour rank
    let pos = dense_ranks(colours);
    let mut by_pos = vec![0usize; p.len()];
    for (i, &q) in pos.iter().enumerate() {
        by_pos[q as usize] = i;
    }
    let mut out = String::new();
    let codims: Vec<String> = by_pos.iter().map(|&i| p.codim(i).to_string()).collect();
    let _ = write!(out, "codims=[{}];", codims.join(","));
    let mut covers: Vec<(u32, u32)> = p.cover_pairs().into_iter().map(|(l, u)| (pos[l], pos[u])).collect();
    covers.sort_unstable();
    let covers: Vec<String> = covers.iter().map(|(l, u)| format!("{l}<{u}")).collect();
    let _ = write!(out, "covers=[{}];", covers.join(","));
    let ordered: Vec<Vec<BigInt>> =
        by_pos.iter().filter_map(|&i| cp.facet_label(i).map(|l| l.to_vec())).collect();
    match mode {
        Mode::Strong => {
            let shown: Vec<String> = ordered.iter().map(|l| format_vector(l)).collect();
            let _ = write!(out, "labels=[{}]", shown.join(","));
        }
        Mode::Weak => {
            let _ = write!(out, "{}", weak_label_form(&ordered, cp.k()));
        }
    }
    out
}

fn format_rational_vector(v: &[BigRational]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(","))
}

fn canonical_sign_rational(v: &mut [BigRational]) {
    if let Some(first) = v.iter().find(|x| !x.is_zero()) {
        if first.is_negative() {
            for x in v.iter_mut() {
                *x = -x.clone();
            }
        }
    }
}

/// Inverse of a nonsingular integer matrix over ℚ (rows convention).
fn rational_inverse(m: &[Vec<BigInt>]) -> Vec<Vec<BigRational>> {
    let n = m.len();
    let mut a: Vec<Vec<BigRational>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r: Vec<BigRational> = row.iter().map(|x| BigRational::from_integer(x.clone())).collect();
            r.extend((0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&i| !a[i][c].is_zero()).expect("nonsingular");
        a.swap(c, p);
        let piv = a[c][c].clone();
        for x in a[c].iter_mut() {
            *x = x.clone() / piv.clone();
        }
        for i in 0..n {
            if i != c && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                let pivot_row = a[c].clone();
                for (x, y) in a[i].iter_mut().zip(pivot_row) {
                    *x = x.clone() - f.clone() * y;
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// GL(k, ℤ)-invariant description of an ordered list of labels.
///
/// Labels are written in a basis of the saturation of their span, then in the
/// rational frame given by the first independent labels; the lattice ℤ^r in
/// that frame is recorded by its Hermite form. The least string over the sign
/// choices of the frame vectors is returned.
fn weak_label_form(labels: &[Vec<BigInt>], k: usize) -> String {
    if labels.is_empty() {
        return "frame=[]".into();
    }
    let all = IntMatrix::from_rows(k, labels.to_vec()).expect("labels of length k");
    let sd = smith_decomposition(&all);
    let r = sd.rank();
    // coordinates in the saturation basis: v·R = (c, 0)
    let coords: Vec<Vec<BigInt>> = labels
        .iter()
        .map(|v| {
            let row = IntMatrix::from_rows(k, vec![v.clone()]).unwrap();
            row.mul(&sd.right).unwrap().row(0)[..r].to_vec()
        })
        .collect();
    let mut frame: Vec<usize> = Vec::new();
    let mut rows: Vec<Vec<BigInt>> = Vec::new();
    for (i, c) in coords.iter().enumerate() {
        rows.push(c.clone());
        if rank_of(r, &rows) == rows.len() {
            frame.push(i);
        } else {
            rows.pop();
        }
        if frame.len() == r {
            break;
        }
    }
    let inv = rational_inverse(&rows);
    let det = IntMatrix::from_rows(r, rows.clone()).unwrap().determinant().unwrap().abs();
    let mut best: Option<String> = None;
    for pattern in 0u64..(1u64 << (r - 1)) {
        let sign = |j: usize| j > 0 && (pattern >> (j - 1)) & 1 == 1;
        // x_i = c_i · C⁻¹ · diag(s)
        let xs: Vec<String> = coords
            .iter()
            .map(|c| {
                let mut x: Vec<BigRational> = (0..r)
                    .map(|j| {
                        let s: BigRational = (0..r).map(|l| BigRational::from_integer(c[l].clone()) * inv[l][j].clone()).sum();
                        if sign(j) {
                            -s
                        } else {
                            s
                        }
                    })
                    .collect();
                canonical_sign_rational(&mut x);
                format_rational_vector(&x)
            })
            .collect();
        // det·C⁻¹·diag(s) is integral; its row lattice records ℤ^r in the frame
        let scaled: Vec<Vec<BigInt>> = inv
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, x)| {
                        let v = (x.clone() * BigRational::from_integer(det.clone())).to_integer();
                        if sign(j) {
                            -v
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let lattice = hnf(&IntMatrix::from_rows(r, scaled).unwrap());
        let s = format!("frame=[{}];index={det};lattice={lattice}", xs.join(","));
        if best.as_ref().is_none_or(|b| s < *b) {
            best = Some(s);
        }
    }
    best.expect("at least one sign pattern")
}
