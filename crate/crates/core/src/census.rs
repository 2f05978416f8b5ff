//! Exhaustive enumeration of characteristic functions over a fixed poset.
//!
//! Labels range over primitive, sign-canonical vectors with entries in
//! `[-B, B]`. The box is a user choice: the true label space is infinite and
//! nothing outside the box is claimed. Facets are labeled one at a time and a
//! branch is cut as soon as some face whose facets are all labeled fails the
//! direct-summand test.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charpair::{Attestations, CharError, CharacteristicPair};
use crate::classify::{canonical_form, equivalence, ClassifyError, Mode, CANONICAL_FACE_LIMIT};
use crate::faceposet::FacePoset;
use crate::lattice::small_rows_form_direct_summand;

/// Default cap on the estimated search-space size.
pub const DEFAULT_BUDGET: f64 = 1e9;

/// Environment variable read when no thread count is given.
pub const THREADS_ENV: &str = "TORCLASS_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dedup {
    None,
    Strong,
    Weak,
}

impl std::str::FromStr for Dedup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Dedup::None),
            "strong" => Ok(Dedup::Strong),
            "weak" => Ok(Dedup::Weak),
            other => Err(format!("unknown dedup mode `{other}` (expected none, strong or weak)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum CensusError {
    #[error("face poset is invalid: {0}")]
    InvalidPoset(String),
    #[error("torus rank must be at least 1")]
    ZeroRank,
    #[error("entry bound must be at least 1")]
    ZeroBound,
    #[error("estimated search space {estimate:.3e} exceeds budget {budget:.3e}")]
    BudgetExceeded { estimate: f64, budget: f64 },
    #[error("entry bound {0} is too large")]
    BoundTooLarge(i64),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Char(#[from] CharError),
    #[error("thread pool: {0}")]
    Threads(String),
}

#[derive(Clone, Debug)]
pub struct CensusSpec {
    pub poset: Arc<FacePoset>,
    pub k: usize,
    pub entry_bound: i64,
    pub dedup: Dedup,
    pub budget: f64,
    /// `None` reads [`THREADS_ENV`], falling back to rayon's default.
    pub threads: Option<usize>,
}

impl CensusSpec {
    pub fn new(poset: Arc<FacePoset>, k: usize, entry_bound: i64, dedup: Dedup) -> Self {
        Self { poset, k, entry_bound, dedup, budget: DEFAULT_BUDGET, threads: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FaceStats {
    /// Entry `c` counts faces of codimension `c`.
    pub faces_per_codim: Vec<usize>,
    /// Number of faces of codimension `min(k, d)`.
    pub euler_count: usize,
    /// Vertex count when `d == k`; these are the fixed points of the action.
    pub fixed_points: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CensusClass {
    pub representative: CharacteristicPair,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CensusResult {
    pub k: usize,
    pub entry_bound: i64,
    pub dedup: Dedup,
    pub universe_size: usize,
    pub estimate: f64,
    pub total_valid: usize,
    pub classes: Vec<CensusClass>,
    pub stats: FaceStats,
}

/// Primitive sign-canonical vectors in `[-bound, bound]^k`, in lexicographic order.
pub fn label_universe(k: usize, bound: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut v = vec![-bound; k];
    loop {
        let first = v.iter().find(|&&x| x != 0);
        if first.is_some_and(|&x| x > 0) && v.iter().fold(0i64, |g, &x| num_integer::gcd(g, x)) == 1 {
            out.push(v.clone());
        }
        // odometer
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if v[i] < bound {
                v[i] += 1;
                break;
            }
            v[i] = -bound;
        }
    }
}

/// Face counts for a pair; `fixed_points` is filled when `d == k`.
pub fn orbit_count_invariants(cp: &CharacteristicPair) -> FaceStats {
    face_stats(cp.poset(), cp.k())
}

fn face_stats(p: &FacePoset, k: usize) -> FaceStats {
    let faces_per_codim = p.codim_profile();
    let count = |c: usize| faces_per_codim.get(c).copied().unwrap_or(0);
    FaceStats {
        euler_count: count(k.min(p.dim())),
        fixed_points: (p.dim() == k).then(|| count(k)),
        faces_per_codim,
    }
}

/// Facet order for the search: each facet meets an earlier one where
/// possible, so faces are completed early.
fn search_order(p: &FacePoset) -> Vec<usize> {
    let m = p.facet_indices().len();
    let mut meets = vec![vec![false; m]; m];
    for i in 0..p.len() {
        let fs = p.facet_indices_containing(i);
        for &f in fs {
            for &g in fs {
                meets[p.facet_position(f).unwrap()][p.facet_position(g).unwrap()] = true;
            }
        }
    }
    let mut order: Vec<usize> = Vec::with_capacity(m);
    while order.len() < m {
        let next = (0..m)
            .filter(|q| !order.contains(q))
            .find(|&q| order.iter().any(|&o| meets[q][o]))
            .or_else(|| (0..m).find(|q| !order.contains(q)))
            .expect("remaining facet");
        order.push(next);
    }
    order
}

struct Enumerator<'a> {
    k: usize,
    universe: &'a [Vec<i64>],
    order: Vec<usize>,
    /// For each search depth, the facet-position sets of faces completed there.
    checks: Vec<Vec<Vec<usize>>>,
}

impl<'a> Enumerator<'a> {
    fn new(p: &FacePoset, k: usize, universe: &'a [Vec<i64>]) -> Self {
        let order = search_order(p);
        let mut depth_of = vec![0usize; order.len()];
        for (d, &q) in order.iter().enumerate() {
            depth_of[q] = d;
        }
        let mut checks = vec![Vec::new(); order.len()];
        for i in 0..p.len() {
            if p.codim(i) < 2 {
                continue;
            }
            let positions: Vec<usize> =
                p.facet_indices_containing(i).iter().map(|&f| p.facet_position(f).unwrap()).collect();
            let done = positions.iter().map(|&q| depth_of[q]).max().unwrap();
            checks[done].push(positions);
        }
        Self { k, universe, order, checks }
    }

    fn ok_at(&self, depth: usize, choice: &[usize]) -> bool {
        self.checks[depth].iter().all(|positions| {
            let rows: Vec<&[i64]> = positions.iter().map(|&q| self.universe[choice[q]].as_slice()).collect();
            small_rows_form_direct_summand(&rows, self.k).expect("small entries")
        })
    }

    /// All valid labelings below a fixed choice for the first facet, as
    /// universe indices in facet-position order.
    fn branch(&self, first: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut choice = vec![usize::MAX; self.order.len()];
        choice[self.order[0]] = first;
        if self.ok_at(0, &choice) {
            self.descend(1, &mut choice, &mut out);
        }
        out
    }

    fn descend(&self, depth: usize, choice: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if depth == self.order.len() {
            out.push(choice.clone());
            return;
        }
        let q = self.order[depth];
        for u in 0..self.universe.len() {
            choice[q] = u;
            if self.ok_at(depth, choice) {
                self.descend(depth + 1, choice, out);
            }
        }
        choice[q] = usize::MAX;
    }
}

fn thread_count(requested: Option<usize>) -> Option<usize> {
    requested.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|s| s.parse().ok())).filter(|&n| n > 0)
}

fn run_in_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T, CensusError> {
    match thread_count(threads) {
        None => Ok(job()),
        Some(n) => {
            let pool =
                rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CensusError::Threads(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

/// Runs the census described by `spec`.
pub fn enumerate(spec: &CensusSpec) -> Result<CensusResult, CensusError> {
    if spec.k == 0 {
        return Err(CensusError::ZeroRank);
    }
    if spec.entry_bound < 1 {
        return Err(CensusError::ZeroBound);
    }
    if spec.entry_bound > 1 << 20 {
        return Err(CensusError::BoundTooLarge(spec.entry_bound));
    }
    let report = spec.poset.validate();
    if !report.is_valid() {
        let detail: Vec<String> = report.violations.iter().map(|v| v.detail.clone()).collect();
        return Err(CensusError::InvalidPoset(detail.join("; ")));
    }
    let p = spec.poset.as_ref();
    let facets = p.facet_indices().len();
    // a universe-size estimate avoids materialising huge boxes before refusing
    let box_size = (2.0 * spec.entry_bound as f64 + 1.0).powi(spec.k as i32);
    if box_size.powi(facets as i32) / 2f64.powi(facets as i32) > spec.budget * 4.0 {
        return Err(CensusError::BudgetExceeded { estimate: (box_size / 2.0).powi(facets as i32), budget: spec.budget });
    }
    let universe = label_universe(spec.k, spec.entry_bound);
    let estimate = (universe.len() as f64).powi(facets as i32);
    if estimate > spec.budget {
        return Err(CensusError::BudgetExceeded { estimate, budget: spec.budget });
    }

    let to_pair = |choice: &[usize]| -> Result<CharacteristicPair, CharError> {
        let labels: Vec<Vec<BigInt>> =
            choice.iter().map(|&u| universe[u].iter().map(|&x| BigInt::from(x)).collect()).collect();
        CharacteristicPair::from_facet_labels(spec.poset.clone(), spec.k, labels, Attestations::default())
    };

    let (labelings, keys) = run_in_pool(spec.threads, || -> Result<_, CensusError> {
        let labelings: Vec<Vec<usize>> = if facets == 0 {
            vec![Vec::new()]
        } else {
            let en = Enumerator::new(p, spec.k, &universe);
            let branches: Vec<Vec<Vec<usize>>> = (0..universe.len()).into_par_iter().map(|u| en.branch(u)).collect();
            branches.into_iter().flatten().collect()
        };
        let keys: Option<Vec<String>> = match spec.dedup {
            Dedup::None => None,
            Dedup::Strong | Dedup::Weak if p.len() <= CANONICAL_FACE_LIMIT => {
                let mode = if spec.dedup == Dedup::Strong { Mode::Strong } else { Mode::Weak };
                let keys: Result<Vec<String>, CensusError> = labelings
                    .par_iter()
                    .map(|c| Ok(canonical_form(&to_pair(c)?, mode)?))
                    .collect();
                Some(keys?)
            }
            _ => None,
        };
        Ok((labelings, keys))
    })??;

    let mut classes: Vec<CensusClass> = Vec::new();
    match (spec.dedup, keys) {
        (Dedup::None, _) => {
            for c in &labelings {
                classes.push(CensusClass { representative: to_pair(c)?, size: 1 });
            }
        }
        (_, Some(keys)) => {
            let mut slot: HashMap<&str, usize> = HashMap::new();
            for (c, key) in labelings.iter().zip(&keys) {
                match slot.get(key.as_str()) {
                    Some(&s) => classes[s].size += 1,
                    None => {
                        slot.insert(key, classes.len());
                        classes.push(CensusClass { representative: to_pair(c)?, size: 1 });
                    }
                }
            }
        }
        (dedup, None) => {
            // beyond the canonical-form bound: compare against each representative
            let mode = if dedup == Dedup::Strong { Mode::Strong } else { Mode::Weak };
            for c in &labelings {
                let cp = to_pair(c)?;
                let mut hit = None;
                for (s, class) in classes.iter().enumerate() {
                    if equivalence(&class.representative, &cp, mode)?.equivalent {
                        hit = Some(s);
                        break;
                    }
                }
                match hit {
                    Some(s) => classes[s].size += 1,
                    None => classes.push(CensusClass { representative: cp, size: 1 }),
                }
            }
        }
    }

    Ok(CensusResult {
        k: spec.k,
        entry_bound: spec.entry_bound,
        dedup: spec.dedup,
        universe_size: universe.len(),
        estimate,
        total_valid: labelings.len(),
        classes,
        stats: face_stats(p, spec.k),
    })
}

/// Canonical strings of the class representatives, for comparing censuses.
pub fn class_keys(result: &CensusResult, mode: Mode) -> Result<BTreeSet<String>, ClassifyError> {
    result.classes.iter().map(|c| canonical_form(&c.representative, mode)).collect()
}
