//! Numerics on the standard chart `ℂ^n × T^{k−n} × ℝ^m`.
//!
//! The torus `T^k` acts by rotating each `z_i` and translating the angles `t`.
//! The orbit space is `ℝ^n_{≥0} × ℝ^m` with orbit map `(|z|², y)`. A
//! [`SmoothMapSpec`] describes a face-preserving diffeomorphism of the orbit
//! space together with two torus-valued frames, and [`lift_diffeo`] evaluates
//! the equivariant lift
//!
//! ```text
//! Ψ(z, t, y) = (f₂(Φ(x)) · f₁(x)⁻¹) · (√(Φ_i(x)/x_i) · z_i, t, Φ_N(x, y)),   x = |z|²
//! ```
//!
//! Orbit-space diffeomorphisms are chains of triangular steps, each exactly
//! invertible, so inverses and compositions are available in closed form.
//! Derivative checks are finite-difference evidence, never proofs.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Tolerance for algebraic identities (equivariance, covering, sections).
pub const ALGEBRAIC_TOL: f64 = 1e-9;
/// Tolerance for the composition law.
pub const COMPOSITION_TOL: f64 = 1e-8;
/// Tolerance for inverse round trips.
pub const INVERSE_TOL: f64 = 1e-7;
/// Tolerance for finite-difference derivative comparisons.
pub const DERIVATIVE_TOL: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("orbit coordinate x[{0}] is negative")]
    NegativeOrbitCoordinate(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("orbit map does not preserve the face x[{coord}] = 0")]
    FacePreservation { coord: usize },
    #[error("corner-quotient hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("invalid step: {0}")]
    Step(String),
    #[error("finite-difference step underflow")]
    StepUnderflow,
    #[error("derivative order {0} outside 1..=4")]
    OrderOutOfRange(usize),
}

fn reduce_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// A point of `ℂ^n × T^{k−n} × ℝ^m`; angles are kept in `[0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelPoint {
    pub z: Vec<Complex64>,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl ModelPoint {
    pub fn new(z: Vec<Complex64>, t: Vec<f64>, y: Vec<f64>) -> Result<Self, LocalError> {
        if !z.iter().all(|c| c.re.is_finite() && c.im.is_finite()) || !all_finite(&t) || !all_finite(&y) {
            return Err(LocalError::NonFinite("model point"));
        }
        Ok(Self { z, t: t.into_iter().map(reduce_angle).collect(), y })
    }

    /// Rotation by the torus element with the given angles.
    pub fn act(&self, angles: &[f64]) -> ModelPoint {
        let n = self.z.len();
        debug_assert_eq!(angles.len(), n + self.t.len());
        ModelPoint {
            z: self.z.iter().zip(angles).map(|(z, &a)| z * Complex64::from_polar(1.0, a)).collect(),
            t: self.t.iter().zip(&angles[n..]).map(|(t, a)| reduce_angle(t + a)).collect(),
            y: self.y.clone(),
        }
    }

    /// Largest coordinate difference, with angles compared on the circle.
    pub fn distance(&self, other: &ModelPoint) -> f64 {
        let dz = self.z.iter().zip(&other.z).map(|(a, b)| (a - b).norm());
        let dt = self.t.iter().zip(&other.t).map(|(&a, &b)| angle_distance(a, b));
        let dy = self.y.iter().zip(&other.y).map(|(a, b)| (a - b).abs());
        dz.chain(dt).chain(dy).fold(0.0, f64::max)
    }
}

/// A point of the orbit space `ℝ^n_{≥0} × ℝ^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl OrbitPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, LocalError> {
        if !all_finite(&x) || !all_finite(&y) {
            return Err(LocalError::NonFinite("orbit point"));
        }
        if let Some(i) = x.iter().position(|&v| v < 0.0) {
            return Err(LocalError::NegativeOrbitCoordinate(i));
        }
        Ok(Self { x, y })
    }

    pub fn distance(&self, other: &OrbitPoint) -> f64 {
        self.x.iter().zip(&other.x).chain(self.y.iter().zip(&other.y)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `(z, t, y) ↦ (|z|², y)`.
pub fn orbit_map(p: &ModelPoint) -> OrbitPoint {
    OrbitPoint { x: p.z.iter().map(|z| z.norm_sqr()).collect(), y: p.y.clone() }
}

/// `(x, y) ↦ (√x, 1, y)`; the torus part of the chart has `k − n` angles.
pub fn standard_section(q: &OrbitPoint, torus_angles: usize) -> Result<ModelPoint, LocalError> {
    if let Some(i) = q.x.iter().position(|&v| v < 0.0) {
        return Err(LocalError::NegativeOrbitCoordinate(i));
    }
    Ok(ModelPoint {
        z: q.x.iter().map(|&x| Complex64::new(x.sqrt(), 0.0)).collect(),
        t: vec![0.0; torus_angles],
        y: q.y.clone(),
    })
}

/// Sparse real polynomial in the orbit coordinates `(x, y)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Poly {
    pub terms: Vec<Monomial>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Monomial {
    pub coef: f64,
    pub x_pow: Vec<u32>,
    pub y_pow: Vec<u32>,
}

impl Poly {
    pub fn constant(c: f64, n: usize, m: usize) -> Self {
        Poly { terms: vec![Monomial { coef: c, x_pow: vec![0; n], y_pow: vec![0; m] }] }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let px: f64 = x.iter().zip(&t.x_pow).map(|(v, &p)| v.powi(p as i32)).product();
                let py: f64 = y.iter().zip(&t.y_pow).map(|(v, &p)| v.powi(p as i32)).product();
                t.coef * px * py
            })
            .sum()
    }

    pub fn uses_x(&self, i: usize) -> bool {
        self.terms.iter().any(|t| t.coef != 0.0 && t.x_pow[i] > 0)
    }

    pub fn uses_y(&self, j: usize) -> bool {
        self.terms.iter().any(|t| t.coef != 0.0 && t.y_pow[j] > 0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Poly { terms: self.terms.iter().map(|t| Monomial { coef: t.coef * c, ..t.clone() }).collect() }
    }

    /// Up to three monomials of total degree at most 2, avoiding the excluded
    /// variables.
    pub fn random(rng: &mut impl Rng, n: usize, m: usize, skip_x: Option<usize>, skip_y: Option<usize>, amp: f64) -> Self {
        let vars: Vec<(bool, usize)> = (0..n)
            .filter(|&i| Some(i) != skip_x)
            .map(|i| (true, i))
            .chain((0..m).filter(|&j| Some(j) != skip_y).map(|j| (false, j)))
            .collect();
        let count = rng.gen_range(1..=3);
        let mut terms = Vec::with_capacity(count);
        for _ in 0..count {
            let mut x_pow = vec![0; n];
            let mut y_pow = vec![0; m];
            if !vars.is_empty() {
                for _ in 0..rng.gen_range(0..=2) {
                    let (is_x, v) = vars[rng.gen_range(0..vars.len())];
                    if is_x {
                        x_pow[v] += 1;
                    } else {
                        y_pow[v] += 1;
                    }
                }
            }
            terms.push(Monomial { coef: rng.gen_range(-amp..=amp), x_pow, y_pow });
        }
        Poly { terms }
    }
}

/// One triangular step of an orbit-space diffeomorphism.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum OrbitStep {
    /// `x_i ← x_i · exp(q(x, y))` where `q` does not involve `x_i`.
    Scale { coord: usize, log_factor: Poly },
    /// `y_j ← a·y_j + b + p(x, y)` where `p` does not involve `y_j` and `a ≠ 0`.
    Shift { coord: usize, scale: f64, offset: f64, shear: Poly },
}

impl OrbitStep {
    fn inverse(&self) -> OrbitStep {
        match self {
            OrbitStep::Scale { coord, log_factor } => OrbitStep::Scale { coord: *coord, log_factor: log_factor.scaled(-1.0) },
            OrbitStep::Shift { coord, scale, offset, shear } => OrbitStep::Shift {
                coord: *coord,
                scale: 1.0 / scale,
                offset: -offset / scale,
                shear: shear.scaled(-1.0 / scale),
            },
        }
    }
}

/// Face-preserving diffeomorphism of `ℝ^n_{≥0} × ℝ^m`, applied step by step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitDiffeo {
    n: usize,
    m: usize,
    steps: Vec<OrbitStep>,
}

impl OrbitDiffeo {
    pub fn identity(n: usize, m: usize) -> Self {
        Self { n, m, steps: Vec::new() }
    }

    pub fn new(n: usize, m: usize, steps: Vec<OrbitStep>) -> Result<Self, LocalError> {
        for s in &steps {
            let shape_ok = |p: &Poly| p.terms.iter().all(|t| t.x_pow.len() == n && t.y_pow.len() == m);
            match s {
                OrbitStep::Scale { coord, log_factor } => {
                    if *coord >= n || !shape_ok(log_factor) {
                        return Err(LocalError::Step(format!("scale step on x[{coord}] has the wrong shape")));
                    }
                    if log_factor.uses_x(*coord) {
                        return Err(LocalError::Step(format!("scale factor of x[{coord}] depends on x[{coord}]")));
                    }
                }
                OrbitStep::Shift { coord, scale, offset, shear } => {
                    if *coord >= m || !shape_ok(shear) {
                        return Err(LocalError::Step(format!("shift step on y[{coord}] has the wrong shape")));
                    }
                    if shear.uses_y(*coord) {
                        return Err(LocalError::Step(format!("shear of y[{coord}] depends on y[{coord}]")));
                    }
                    if *scale == 0.0 || !scale.is_finite() || !offset.is_finite() {
                        return Err(LocalError::Step(format!("shift step on y[{coord}] is not invertible")));
                    }
                }
            }
        }
        Ok(Self { n, m, steps })
    }

    pub fn steps(&self) -> &[OrbitStep] {
        &self.steps
    }

    /// Applies the map and also returns `log(Φ_i(x)/x_i)` for each `i`,
    /// accumulated exactly across steps (valid at `x_i = 0` as well).
    pub fn apply_with_log_ratios(&self, q: &OrbitPoint) -> Result<(OrbitPoint, Vec<f64>), LocalError> {
        if q.x.len() != self.n || q.y.len() != self.m {
            return Err(LocalError::Dimension(format!(
                "point has ({}, {}) coordinates, map expects ({}, {})",
                q.x.len(),
                q.y.len(),
                self.n,
                self.m
            )));
        }
        let (mut x, mut y) = (q.x.clone(), q.y.clone());
        let mut log_ratio = vec![0.0; self.n];
        for step in &self.steps {
            match step {
                OrbitStep::Scale { coord, log_factor } => {
                    let l = log_factor.eval(&x, &y);
                    x[*coord] *= l.exp();
                    log_ratio[*coord] += l;
                }
                OrbitStep::Shift { coord, scale, offset, shear } => {
                    y[*coord] = scale * y[*coord] + offset + shear.eval(&x, &y);
                }
            }
        }
        if !all_finite(&x) || !all_finite(&y) || !all_finite(&log_ratio) {
            return Err(LocalError::NonFinite("orbit map image"));
        }
        for i in 0..self.n {
            if (q.x[i] == 0.0) != (x[i] == 0.0) || x[i] < 0.0 {
                return Err(LocalError::FacePreservation { coord: i });
            }
        }
        Ok((OrbitPoint { x, y }, log_ratio))
    }

    pub fn apply(&self, q: &OrbitPoint) -> Result<OrbitPoint, LocalError> {
        self.apply_with_log_ratios(q).map(|(p, _)| p)
    }

    pub fn inverse(&self) -> OrbitDiffeo {
        OrbitDiffeo { n: self.n, m: self.m, steps: self.steps.iter().rev().map(OrbitStep::inverse).collect() }
    }

    /// `self` first, then `next`.
    pub fn then(&self, next: &OrbitDiffeo) -> OrbitDiffeo {
        OrbitDiffeo { n: self.n, m: self.m, steps: self.steps.iter().chain(&next.steps).cloned().collect() }
    }

    pub fn random(rng: &mut impl Rng, n: usize, m: usize) -> OrbitDiffeo {
        let mut steps = Vec::new();
        for _ in 0..2 {
            for i in 0..n {
                steps.push(OrbitStep::Scale { coord: i, log_factor: Poly::random(rng, n, m, Some(i), None, 0.05) });
            }
            for j in 0..m {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                steps.push(OrbitStep::Shift {
                    coord: j,
                    scale: sign * rng.gen_range(0.6..1.4),
                    offset: rng.gen_range(-0.5..0.5),
                    shear: Poly::random(rng, n, m, None, Some(j), 0.05),
                });
            }
        }
        OrbitDiffeo { n, m, steps }
    }
}

/// One signed summand of a torus-valued map: angle polynomials evaluated after
/// an orbit-space diffeomorphism.
#[derive(Clone, Debug, PartialEq, Serialize)]
struct FrameTerm {
    sign: f64,
    pre: OrbitDiffeo,
    angles: Vec<Poly>,
}

/// A smooth map from the orbit space to `T^k`, as a sum of angle functions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorusFrame {
    k: usize,
    terms: Vec<FrameTerm>,
}

impl TorusFrame {
    pub fn trivial(k: usize) -> Self {
        Self { k, terms: Vec::new() }
    }

    pub fn from_angles(angles: Vec<Poly>, n: usize, m: usize) -> Self {
        let k = angles.len();
        Self { k, terms: vec![FrameTerm { sign: 1.0, pre: OrbitDiffeo::identity(n, m), angles }] }
    }

    /// Angles in `ℝ^k` (not reduced).
    pub fn eval(&self, q: &OrbitPoint) -> Result<Vec<f64>, LocalError> {
        let mut out = vec![0.0; self.k];
        for term in &self.terms {
            let p = term.pre.apply(q)?;
            for (o, a) in out.iter_mut().zip(&term.angles) {
                *o += term.sign * a.eval(&p.x, &p.y);
            }
        }
        Ok(out)
    }

    fn precomposed(&self, first: &OrbitDiffeo) -> TorusFrame {
        TorusFrame {
            k: self.k,
            terms: self.terms.iter().map(|t| FrameTerm { pre: first.then(&t.pre), ..t.clone() }).collect(),
        }
    }

    fn plus(&self, other: &TorusFrame, sign: f64) -> TorusFrame {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|t| FrameTerm { sign: t.sign * sign, ..t.clone() }));
        TorusFrame { k: self.k, terms }
    }
}

/// Data for a lift: the orbit-space map `Φ` and the frames `f₁`, `f₂` of the
/// regular sections `s_i = f_i · s₀` on source and target.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothMapSpec {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub phi: OrbitDiffeo,
    pub source_frame: TorusFrame,
    pub target_frame: TorusFrame,
}

impl SmoothMapSpec {
    pub fn new(
        n: usize,
        k: usize,
        m: usize,
        phi: OrbitDiffeo,
        source_frame: TorusFrame,
        target_frame: TorusFrame,
    ) -> Result<Self, LocalError> {
        check_dims(n, k)?;
        if phi.n != n || phi.m != m || source_frame.k != k || target_frame.k != k {
            return Err(LocalError::Dimension("spec components disagree on (n, k, m)".into()));
        }
        Ok(Self { n, k, m, phi, source_frame, target_frame })
    }

    pub fn identity(n: usize, k: usize, m: usize) -> Result<Self, LocalError> {
        Self::new(n, k, m, OrbitDiffeo::identity(n, m), TorusFrame::trivial(k), TorusFrame::trivial(k))
    }

    pub fn random(rng: &mut impl Rng, n: usize, k: usize, m: usize) -> Result<Self, LocalError> {
        let frame = |rng: &mut dyn rand::RngCore| {
            let mut rng = rng;
            TorusFrame::from_angles((0..k).map(|_| Poly::random(&mut rng, n, m, None, None, 1.0)).collect(), n, m)
        };
        let phi = OrbitDiffeo::random(rng, n, m);
        let f1 = frame(rng);
        let f2 = frame(rng);
        Self::new(n, k, m, phi, f1, f2)
    }

    /// The spec whose lift is `lift(next) ∘ lift(self)`.
    pub fn then(&self, next: &SmoothMapSpec) -> Result<SmoothMapSpec, LocalError> {
        if (self.n, self.k, self.m) != (next.n, next.k, next.m) {
            return Err(LocalError::Dimension("composed specs have different shapes".into()));
        }
        let back = next.phi.inverse();
        let correction = self.target_frame.plus(&next.source_frame, -1.0).precomposed(&back);
        Ok(SmoothMapSpec {
            n: self.n,
            k: self.k,
            m: self.m,
            phi: self.phi.then(&next.phi),
            source_frame: self.source_frame.clone(),
            target_frame: next.target_frame.plus(&correction, 1.0),
        })
    }

    pub fn inverse(&self) -> SmoothMapSpec {
        SmoothMapSpec {
            n: self.n,
            k: self.k,
            m: self.m,
            phi: self.phi.inverse(),
            source_frame: self.target_frame.clone(),
            target_frame: self.source_frame.clone(),
        }
    }
}

fn check_dims(n: usize, k: usize) -> Result<(), LocalError> {
    if n > k {
        return Err(LocalError::Dimension(format!("n = {n} exceeds k = {k}")));
    }
    Ok(())
}

/// `f(x_i)/x_i` for `x > 0`; at `x = 0` the exact derivative when supplied,
/// else the Richardson limit of `f(h)/h` as `h → 0`. That quotient is the
/// central second difference of the even extension `s ↦ f(s²)`, halved.
///
/// Hypotheses are sampled: `f(0, y) = 0`, `f(x, y) > 0` for `x > 0`, and a
/// positive boundary derivative.
pub fn corner_quotient(
    f: impl Fn(f64, &[f64]) -> f64,
    x: f64,
    y: &[f64],
    derivative_at_zero: Option<f64>,
) -> Result<f64, LocalError> {
    if !x.is_finite() || x < 0.0 {
        return Err(LocalError::Hypothesis(format!("x = {x} is not a nonnegative number")));
    }
    let at_zero = f(0.0, y);
    if at_zero.abs() > 1e-12 {
        return Err(LocalError::Hypothesis(format!("f(0, y) = {at_zero:e} is not zero")));
    }
    if x > 0.0 {
        let v = f(x, y);
        if !(v > 0.0) {
            return Err(LocalError::Hypothesis(format!("f({x}, y) = {v} is not positive")));
        }
        return Ok(v / x);
    }
    let d = match derivative_at_zero {
        Some(d) => d,
        None => richardson_at_zero(|h| f(h, y) / h, 0.125, 10),
    };
    if !(d > 0.0) {
        return Err(LocalError::Hypothesis(format!("boundary derivative {d} is not positive")));
    }
    Ok(d)
}

/// Extrapolates `g(h) → g(0)` from `g(h0 / 2^j)`, `j < levels`.
fn richardson_at_zero(g: impl Fn(f64) -> f64, h0: f64, levels: usize) -> f64 {
    let samples: Vec<f64> = (0..levels).map(|j| g(h0 / f64::powi(2.0, j as i32))).collect();
    richardson(&samples)
}

/// Richardson table for samples at steps `h0 / 2^j` with an error series in
/// all powers of `h`; returns the diagonal entry that moved least.
fn richardson(samples: &[f64]) -> f64 {
    let mut prev: Vec<f64> = Vec::new();
    let mut best = samples[0];
    let mut best_change = f64::INFINITY;
    for (j, &s) in samples.iter().enumerate() {
        let mut row = vec![s];
        for l in 1..=j {
            let factor = f64::powi(2.0, l as i32) - 1.0;
            row.push(row[l - 1] + (row[l - 1] - prev[l - 1]) / factor);
        }
        if j > 0 {
            let change = (row[j] - prev[j - 1]).abs();
            if change < best_change {
                best_change = change;
                best = row[j];
            }
        }
        prev = row;
    }
    best
}

/// `F(x, y) = f(x², y)`, even in every `x_i`.
pub fn even_substitution<F>(f: F) -> impl Fn(&[f64], &[f64]) -> f64
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    move |x, y| {
        let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
        f(&sq, y)
    }
}

/// Evaluates `Ψ` at `p`. Components with `z_i = 0` stay exactly zero; the
/// factor `√(Φ_i/x_i)` comes from [`corner_quotient`] with the exact boundary
/// ratio that the step chain provides.
pub fn lift_diffeo(spec: &SmoothMapSpec, p: &ModelPoint) -> Result<ModelPoint, LocalError> {
    if p.z.len() != spec.n || p.t.len() != spec.k - spec.n || p.y.len() != spec.m {
        return Err(LocalError::Dimension("model point does not match the spec".into()));
    }
    let q = orbit_map(p);
    let (image, log_ratio) = spec.phi.apply_with_log_ratios(&q)?;
    let mut z = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let component = |u: f64, _: &[f64]| {
            let mut moved = q.clone();
            moved.x[i] = u;
            spec.phi.apply(&moved).map(|r| r.x[i]).unwrap_or(f64::NAN)
        };
        let ratio = corner_quotient(component, q.x[i], &q.y, Some(log_ratio[i].exp()))?;
        z.push(p.z[i] * ratio.sqrt());
    }
    let twist: Vec<f64> = spec
        .target_frame
        .eval(&image)?
        .iter()
        .zip(spec.source_frame.eval(&q)?)
        .map(|(a, b)| a - b)
        .collect();
    let moved = ModelPoint { z, t: p.t.clone(), y: image.y };
    Ok(moved.act(&twist))
}

/// `f(x) · s₀(x)`.
pub fn regular_section(frame: &TorusFrame, q: &OrbitPoint, torus_angles: usize) -> Result<ModelPoint, LocalError> {
    Ok(standard_section(q, torus_angles)?.act(&frame.eval(q)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeEstimate {
    pub order: usize,
    /// `1` for forward differences, `-1` for backward.
    pub direction: i8,
    pub raw: Vec<f64>,
    pub extrapolated: f64,
    /// Largest ratio of successive changes along the step ladder.
    pub contraction: f64,
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum ProbeFlag {
    Divergent { order: usize, direction: i8 },
    OneSidedMismatch { order: usize, left: f64, right: f64 },
}

/// Outcome of [`smoothness_probe`]. This is numerical evidence only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub at: f64,
    pub max_order: usize,
    pub estimates: Vec<DerivativeEstimate>,
    pub flags: Vec<ProbeFlag>,
    pub consistent_with_smooth: bool,
    pub note: &'static str,
}

impl ProbeReport {
    pub fn estimate(&self, order: usize, direction: i8) -> Option<&DerivativeEstimate> {
        self.estimates.iter().find(|e| e.order == order && e.direction == direction)
    }
}

const PROBE_BASE_STEP: f64 = 0.25;
const PROBE_LEVELS: usize = 6;
const DIVERGENCE_RATIO: f64 = 0.75;

fn binomial(n: usize, i: usize) -> f64 {
    (0..i).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// One-sided derivative estimates of orders `1..=max_order` at `at`, from
/// finite differences over a halving step ladder, then Richardson
/// extrapolation. Growth along the ladder flags a blow-up; left and right
/// limits that disagree are flagged as a kink.
pub fn smoothness_probe(f: impl Fn(f64) -> f64, at: f64, max_order: usize, side: Side) -> Result<ProbeReport, LocalError> {
    smoothness_probe_with(f, at, max_order, side, PROBE_BASE_STEP, PROBE_LEVELS)
}

pub fn smoothness_probe_with(
    f: impl Fn(f64) -> f64,
    at: f64,
    max_order: usize,
    side: Side,
    base_step: f64,
    levels: usize,
) -> Result<ProbeReport, LocalError> {
    if !(1..=4).contains(&max_order) {
        return Err(LocalError::OrderOutOfRange(max_order));
    }
    let smallest = base_step / f64::powi(2.0, levels as i32);
    if !(base_step.is_finite() && base_step > 0.0) || levels < 3 || smallest < 1e-8 * (1.0 + at.abs()) {
        return Err(LocalError::StepUnderflow);
    }
    let directions: &[i8] = match side {
        Side::Left => &[-1],
        Side::Right => &[1],
        Side::Both => &[-1, 1],
    };
    let mut estimates = Vec::new();
    let mut flags = Vec::new();
    for order in 1..=max_order {
        for &dir in directions {
            let s = f64::from(dir);
            let mut raw = Vec::with_capacity(levels);
            let mut noise = Vec::with_capacity(levels);
            for j in 0..levels {
                let h = base_step / f64::powi(2.0, j as i32);
                let mut acc = 0.0;
                let mut scale: f64 = 0.0;
                for i in 0..=order {
                    let sign = if (order - i) % 2 == 0 { 1.0 } else { -1.0 };
                    let v = f(at + s * i as f64 * h);
                    acc += sign * binomial(order, i) * v;
                    scale = scale.max(v.abs());
                }
                let denom = (s * h).powi(order as i32);
                raw.push(acc / denom);
                noise.push(100.0 * f64::EPSILON * f64::powi(2.0, order as i32) * scale.max(1.0) / h.powi(order as i32));
            }
            if raw.iter().any(|v| !v.is_finite()) {
                flags.push(ProbeFlag::Divergent { order, direction: dir });
                estimates.push(DerivativeEstimate {
                    order,
                    direction: dir,
                    extrapolated: f64::NAN,
                    raw,
                    contraction: f64::INFINITY,
                    stable: false,
                });
                continue;
            }
            let mut contraction: f64 = 0.0;
            for j in 2..levels {
                let (d1, d2) = ((raw[j - 1] - raw[j - 2]).abs(), (raw[j] - raw[j - 1]).abs());
                let floor = noise[j];
                if d2 <= floor && d1 <= floor {
                    continue;
                }
                contraction = contraction.max(if d1 <= floor { f64::INFINITY } else { d2 / d1 });
            }
            let stable = contraction <= DIVERGENCE_RATIO;
            if !stable {
                flags.push(ProbeFlag::Divergent { order, direction: dir });
            }
            estimates.push(DerivativeEstimate {
                order,
                direction: dir,
                extrapolated: richardson(&raw),
                raw,
                contraction,
                stable,
            });
        }
        if side == Side::Both {
            let pick = |d: i8| estimates.iter().find(|e: &&DerivativeEstimate| e.order == order && e.direction == d);
            if let (Some(l), Some(r)) = (pick(-1), pick(1)) {
                if l.stable && r.stable {
                    let scale = l.extrapolated.abs().max(r.extrapolated.abs()).max(1.0);
                    if (l.extrapolated - r.extrapolated).abs() > DERIVATIVE_TOL * scale {
                        flags.push(ProbeFlag::OneSidedMismatch { order, left: l.extrapolated, right: r.extrapolated });
                    }
                }
            }
        }
    }
    Ok(ProbeReport {
        at,
        max_order,
        consistent_with_smooth: flags.is_empty(),
        estimates,
        flags,
        note: "finite-difference evidence, not a proof of smoothness",
    })
}

// ---------------------------------------------------------------------------
// Randomised checks
// ---------------------------------------------------------------------------

/// Random chart point with `x ≤ 2`; each `z_i` is exactly zero with
/// probability `boundary`.
pub fn random_model_point(rng: &mut impl Rng, n: usize, k: usize, m: usize, boundary: f64) -> ModelPoint {
    let z = (0..n)
        .map(|_| {
            if rng.gen_bool(boundary) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(rng.gen_range(0.0..2f64.sqrt()), rng.gen_range(0.0..TAU))
            }
        })
        .collect();
    let t = (0..k - n).map(|_| rng.gen_range(0.0..TAU)).collect();
    let y = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ModelPoint::new(z, t, y).expect("finite")
}

pub fn random_torus_element(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.gen_range(0.0..TAU)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectionReport {
    pub samples: usize,
    pub boundary_samples: usize,
    pub max_discrepancy: f64,
    pub max_interior: f64,
    pub max_boundary: f64,
}

/// Compares `Ψ ∘ s₁` with `s₂ ∘ Φ` at random orbit points, a quarter of
/// which have some `x_i = 0`.
pub fn section_compat_check(spec: &SmoothMapSpec, samples: usize, rng: &mut impl Rng) -> Result<SectionReport, LocalError> {
    let torus = spec.k - spec.n;
    let mut report =
        SectionReport { samples, boundary_samples: 0, max_discrepancy: 0.0, max_interior: 0.0, max_boundary: 0.0 };
    for _ in 0..samples {
        let q = orbit_map(&random_model_point(rng, spec.n, spec.k, spec.m, 0.25));
        let lhs = lift_diffeo(spec, &regular_section(&spec.source_frame, &q, torus)?)?;
        let rhs = regular_section(&spec.target_frame, &spec.phi.apply(&q)?, torus)?;
        let d = lhs.distance(&rhs);
        if q.x.contains(&0.0) {
            report.boundary_samples += 1;
            report.max_boundary = report.max_boundary.max(d);
        } else {
            report.max_interior = report.max_interior.max(d);
        }
        report.max_discrepancy = report.max_discrepancy.max(d);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalCheckConfig {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub samples: usize,
    pub specs: usize,
    pub seed: u64,
    /// Use the identity spec instead of random ones.
    pub trivial: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalCheckReport {
    pub config: LocalCheckConfig,
    pub checks: Vec<CheckResult>,
    pub boundary_samples: usize,
    pub pass: bool,
}

const CHECKS: [(&str, f64); 5] = [
    ("equivariance", ALGEBRAIC_TOL),
    ("covering", ALGEBRAIC_TOL),
    ("section_compatibility", ALGEBRAIC_TOL),
    ("composition", COMPOSITION_TOL),
    ("inverse", INVERSE_TOL),
];

fn check_one_spec(cfg: &LocalCheckConfig, index: usize) -> Result<([f64; 5], usize), LocalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index as u64));
    let (n, k, m) = (cfg.n, cfg.k, cfg.m);
    let (spec, other) = if cfg.trivial {
        (SmoothMapSpec::identity(n, k, m)?, SmoothMapSpec::identity(n, k, m)?)
    } else {
        (SmoothMapSpec::random(&mut rng, n, k, m)?, SmoothMapSpec::random(&mut rng, n, k, m)?)
    };
    let composed = spec.then(&other)?;
    let inverse = spec.inverse();
    let mut worst = [0.0f64; 5];
    let mut boundary = 0;
    for _ in 0..cfg.samples {
        let p = random_model_point(&mut rng, n, k, m, 0.25);
        if p.z.iter().any(|z| z.norm_sqr() == 0.0) {
            boundary += 1;
        }
        let g = random_torus_element(&mut rng, k);
        let image = lift_diffeo(&spec, &p)?;
        let eq = lift_diffeo(&spec, &p.act(&g))?.distance(&image.act(&g));
        let cov = orbit_map(&image).distance(&spec.phi.apply(&orbit_map(&p))?);
        let comp = lift_diffeo(&other, &image)?.distance(&lift_diffeo(&composed, &p)?);
        let inv = lift_diffeo(&inverse, &image)?.distance(&p);
        for (w, d) in worst.iter_mut().zip([eq, cov, 0.0, comp, inv]) {
            *w = w.max(d);
        }
    }
    let sec = section_compat_check(&spec, cfg.samples, &mut rng)?;
    worst[2] = sec.max_discrepancy;
    Ok((worst, boundary + sec.boundary_samples))
}

/// Runs every identity check over `specs` random specs; specs are seeded
/// independently so the report does not depend on scheduling.
pub fn run_localcheck(cfg: &LocalCheckConfig) -> Result<LocalCheckReport, LocalError> {
    check_dims(cfg.n, cfg.k)?;
    let per_spec: Vec<([f64; 5], usize)> =
        (0..cfg.specs).into_par_iter().map(|i| check_one_spec(cfg, i)).collect::<Result<_, _>>()?;
    let mut worst = [0.0f64; 5];
    let mut boundary = 0;
    for (w, b) in per_spec {
        for (acc, d) in worst.iter_mut().zip(w) {
            *acc = acc.max(d);
        }
        boundary += b;
    }
    let checks: Vec<CheckResult> = CHECKS
        .iter()
        .zip(worst)
        .map(|(&(name, tolerance), d)| CheckResult { name, max_discrepancy: d, tolerance, pass: d <= tolerance })
        .collect();
    Ok(LocalCheckReport { pass: checks.iter().all(|c| c.pass), config: cfg.clone(), checks, boundary_samples: boundary })
}
