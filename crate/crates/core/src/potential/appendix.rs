//! Stationary points of `f_LdG + 2α(Qẑ·ẑ − β)²` written in spectral variables, and the
//! resulting test of when `ẑ` is an eigenvector of the minimizers.
//!
//! With `Q = Σ λ_i v_i⊗v_i` and `y_i = (v_i·ẑ)²` the function becomes
//! `F(λ, y) = f_LdG(λ) + A(λ·y − β)²`, `A = 2α`, on `Σλ_i = 0`, `Σy_i = 1`, `y_i ≥ 0`.
//! The `γ` term is ignored here, as in the spectral analysis it is built on.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{s_star, Potential, PotentialParams, SurfaceVariant};
use crate::math::{abs, sqrt};
use crate::qtensor::QTensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryPoint {
    pub lambda: [f64; 3],
    pub y: [f64; 3],
    pub h_lambda: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryCase {
    /// `λ = 0`, `y = (1/3, 1/3, 1/3)`.
    IsotropicInterior,
    /// `λ·y = β` with a single nonzero `y_i`.
    CombinationTrivial,
    /// `λ·y = β` with at least two nonzero `y_i`.
    CombinationNontrivial,
    /// `λ·y ≠ β` and some `y_i ∈ {0, 1}`.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggedPoint {
    pub point: StationaryPoint,
    pub case: StationaryCase,
}

fn coupling(p: &PotentialParams) -> f64 {
    2.0 * p.alpha
}

/// `∂f_LdG/∂λ_i = 2aλ_i + 2bλ_i² + 2c|λ|²λ_i`.
pub fn f_ldg_partials(p: &PotentialParams, l: &[f64; 3]) -> [f64; 3] {
    let t2 = l[0] * l[0] + l[1] * l[1] + l[2] * l[2];
    core::array::from_fn(|i| 2.0 * p.a * l[i] + 2.0 * p.b * l[i] * l[i] + 2.0 * p.c * t2 * l[i])
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// The multiplier `h_λ` eliminated from the `λ` equations.
pub fn h_lambda(p: &PotentialParams, lambda: &[f64; 3], y: &[f64; 3]) -> f64 {
    let fl = f_ldg_partials(p, lambda);
    let gap = dot3(lambda, y) - p.beta;
    -(fl[0] + fl[1] + fl[2]) / 3.0 - 2.0 * coupling(p) * gap / 3.0
}

fn residual_vector(p: &PotentialParams, lambda: &[f64; 3], y: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    // y-equations only on components off the boundary; h_y absorbs their mean
    let free: Vec<usize> = (0..3).filter(|&i| y[i] > 1e-12).collect();
    residual_vector_on_face(p, lambda, y, &free)
}

/// Max-norm of the stationarity system together with the constraint violations.
pub fn appendix_residual(sp: &StationaryPoint, p: &PotentialParams) -> f64 {
    let (r1, r2) = residual_vector(p, &sp.lambda, &sp.y);
    let cons = [
        abs(sp.lambda.iter().sum::<f64>()),
        abs(sp.y.iter().sum::<f64>() - 1.0),
        sp.y.iter().fold(0.0, |m: f64, v| m.max(-v)),
    ];
    r1.iter()
        .chain(r2.iter())
        .chain(cons.iter())
        .fold(0.0, |m: f64, v| m.max(abs(*v)))
}

pub fn stationary_point(p: &PotentialParams, lambda: [f64; 3], y: [f64; 3]) -> StationaryPoint {
    let mut sp = StationaryPoint {
        lambda,
        y,
        h_lambda: h_lambda(p, &lambda, &y),
        residual: 0.0,
    };
    sp.residual = appendix_residual(&sp, p);
    sp
}

pub fn classify_point(sp: &StationaryPoint, p: &PotentialParams) -> StationaryCase {
    let tol = 1e-8;
    if abs(dot3(&sp.lambda, &sp.y) - p.beta) < tol {
        if sp.y.iter().any(|v| *v > 1.0 - 1e-9) {
            StationaryCase::CombinationTrivial
        } else {
            StationaryCase::CombinationNontrivial
        }
    } else if sp.lambda.iter().all(|l| abs(*l) < tol) && sp.y.iter().all(|v| *v > 1e-9) {
        StationaryCase::IsotropicInterior
    } else {
        StationaryCase::Boundary
    }
}

/// Unknowns on the face of the `y`-simplex whose free components are `free`:
/// `(λ1, λ2, y_free[0..k-1])`.
struct Face<'a> {
    free: &'a [usize],
}

impl Face<'_> {
    fn unpack(&self, u: &[f64]) -> ([f64; 3], [f64; 3]) {
        let lambda = [u[0], u[1], -u[0] - u[1]];
        let mut y = [0.0; 3];
        let k = self.free.len();
        let mut rest = 1.0;
        for j in 0..k - 1 {
            y[self.free[j]] = u[2 + j];
            rest -= u[2 + j];
        }
        y[self.free[k - 1]] = rest;
        (lambda, y)
    }

    fn equations(&self, p: &PotentialParams, u: &[f64]) -> Vec<f64> {
        let (lambda, y) = self.unpack(u);
        let (r1, r2) = residual_vector_on_face(p, &lambda, &y, self.free);
        let mut e = alloc::vec![r1[0], r1[1]];
        for &i in &self.free[..self.free.len() - 1] {
            e.push(r2[i]);
        }
        e
    }
}

fn residual_vector_on_face(
    p: &PotentialParams,
    lambda: &[f64; 3],
    y: &[f64; 3],
    free: &[usize],
) -> ([f64; 3], [f64; 3]) {
    let a = coupling(p);
    let fl = f_ldg_partials(p, lambda);
    let mean = (fl[0] + fl[1] + fl[2]) / 3.0;
    let gap = dot3(lambda, y) - p.beta;
    let r1 = core::array::from_fn(|i| fl[i] + 2.0 * a * gap * (y[i] - 1.0 / 3.0) - mean);
    let hy = -free.iter().map(|&i| 2.0 * a * gap * lambda[i]).sum::<f64>() / free.len().max(1) as f64;
    let mut r2 = [0.0; 3];
    for &i in free {
        r2[i] = 2.0 * a * gap * lambda[i] + hy;
    }
    (r1, r2)
}

/// Solves `J x = b` by Gaussian elimination with partial pivoting.
fn solve_dense(mut j: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| abs(j[r][col]).total_cmp(&abs(j[s][col])))?;
        if abs(j[piv][col]) < 1e-300 {
            return None;
        }
        j.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..n {
            let f = j[r][col] / j[col][col];
            for c in col..n {
                j[r][c] -= f * j[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = alloc::vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|c| j[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / j[r][r];
    }
    Some(x)
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(abs(*x)))
}

/// Damped Newton (Levenberg–Marquardt) with a finite-difference Jacobian.
fn newton(face: &Face, p: &PotentialParams, mut u: Vec<f64>) -> Option<Vec<f64>> {
    let n = u.len();
    let mut mu = 1e-6;
    let mut r = face.equations(p, &u);
    for _ in 0..200 {
        if norm_inf(&r) < 1e-13 {
            return Some(u);
        }
        let h = 1e-7;
        let mut jac = alloc::vec![alloc::vec![0.0; n]; n];
        for k in 0..n {
            let mut up = u.clone();
            let mut um = u.clone();
            up[k] += h;
            um[k] -= h;
            let (rp, rm) = (face.equations(p, &up), face.equations(p, &um));
            for i in 0..n {
                jac[i][k] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        // normal equations (JᵀJ + μI) δ = −Jᵀr
        let mut jtj = alloc::vec![alloc::vec![0.0; n]; n];
        let mut jtr = alloc::vec![0.0; n];
        for a in 0..n {
            for b in 0..n {
                jtj[a][b] = (0..n).map(|i| jac[i][a] * jac[i][b]).sum();
            }
            jtr[a] = -(0..n).map(|i| jac[i][a] * r[i]).sum::<f64>();
            jtj[a][a] += mu;
        }
        let delta = solve_dense(jtj, jtr)?;
        let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + d).collect();
        let rt = face.equations(p, &trial);
        if norm_inf(&rt) < norm_inf(&r) {
            u = trial;
            r = rt;
            mu = (mu * 0.3).max(1e-15);
        } else {
            mu *= 10.0;
            if mu > 1e8 {
                return None;
            }
        }
    }
    (norm_inf(&r) < 1e-11).then_some(u)
}

fn canonical(sp: &StationaryPoint) -> [(f64, f64); 3] {
    let mut pairs = [
        (sp.lambda[0], sp.y[0]),
        (sp.lambda[1], sp.y[1]),
        (sp.lambda[2], sp.y[2]),
    ];
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pairs
}

/// Stationary points on every face of the `y`-simplex, found by damped Newton from
/// `starts_per_face` seeded random starts and deduplicated up to simultaneous permutation
/// of `(λ, y)`. Returns an empty list when nothing converges (for instance `α = 0`, where
/// `y` is undetermined).
pub fn appendix_solve(p: &PotentialParams, seed: u64, starts_per_face: usize) -> Vec<TaggedPoint> {
    let mut out: Vec<TaggedPoint> = Vec::new();
    if p.alpha <= 0.0 {
        return out;
    }
    let scale = 1.5 * abs(s_star(p).value).max(abs(p.beta)).max(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let faces: [&[usize]; 7] = [&[0], &[1], &[2], &[0, 1], &[0, 2], &[1, 2], &[0, 1, 2]];
    for free in faces {
        let face = Face { free };
        for start in 0..=starts_per_face {
            // the first start sits near the isotropic state at the face barycenter
            let (mut u, mut w): (Vec<f64>, Vec<f64>) = if start == 0 {
                (alloc::vec![1e-3 * scale, -2e-3 * scale], alloc::vec![1.0; free.len()])
            } else {
                (
                    alloc::vec![rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)],
                    (0..free.len()).map(|_| rng.gen_range(0.05..1.0)).collect(),
                )
            };
            let tot: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= tot);
            u.extend_from_slice(&w[..free.len() - 1]);
            let Some(sol) = newton(&face, p, u) else { continue };
            let (lambda, y) = face.unpack(&sol);
            if free.iter().any(|&i| y[i] <= 1e-10 || y[i] > 1.0 + 1e-12) && free.len() > 1 {
                continue;
            }
            let sp = stationary_point(p, lambda, y);
            if sp.residual > 1e-9 {
                continue;
            }
            let key = canonical(&sp);
            let dup = out.iter().any(|t| {
                let k = canonical(&t.point);
                k.iter()
                    .zip(key.iter())
                    .all(|(a, b)| abs(a.0 - b.0) < 1e-7 && abs(a.1 - b.1) < 1e-7)
            });
            if !dup {
                out.push(TaggedPoint {
                    point: sp,
                    case: classify_point(&sp, p),
                });
            }
        }
    }
    out.sort_by(|a, b| {
        let (ka, kb) = (canonical(&a.point), canonical(&b.point));
        ka.iter()
            .zip(kb.iter())
            .map(|(x, y)| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)))
            .find(|o| o.is_ne())
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    out
}

/// Where `β` sits relative to the spectra of the stationary points of `f_LdG`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaCase {
    /// Reduced surface term: no `β` coupling, wells are bulk minimizers with `ẑ` as an
    /// eigenvector.
    Reduced,
    /// `β` is not a convex combination of the eigenvalues of any stationary point.
    NotCombination,
    /// `β` equals an eigenvalue of the bulk minimizer.
    Trivial,
    /// `β` lies strictly inside the bulk minimizer's spectral range without equaling an
    /// eigenvalue.
    Nontrivial,
    /// `β` is only a combination for a non-minimizing stationary point.
    OtherStationary,
}

/// Stationary points of `f_LdG` are uniaxial with `s` a root of `s(3a + bs + 2cs²) = 0`.
fn stationary_spectra(p: &PotentialParams) -> Vec<[f64; 3]> {
    let mut out = alloc::vec![[0.0; 3]];
    let disc = p.b * p.b - 24.0 * p.a * p.c;
    if disc >= 0.0 {
        let r = sqrt(disc);
        for s in [(-p.b + r) / (4.0 * p.c), (-p.b - r) / (4.0 * p.c)] {
            if s != 0.0 {
                out.push([-s / 3.0, -s / 3.0, 2.0 * s / 3.0]);
            }
        }
    }
    out
}

pub fn beta_case(p: &PotentialParams) -> BetaCase {
    if p.variant == SurfaceVariant::Reduced {
        return BetaCase::Reduced;
    }
    let tol = 1e-9;
    let s = s_star(p).value;
    let bulk = [-s / 3.0, -s / 3.0, 2.0 * s / 3.0];
    let (lo, hi) = (bulk[0].min(bulk[2]), bulk[0].max(bulk[2]));
    if bulk.iter().any(|l| abs(l - p.beta) <= tol) {
        BetaCase::Trivial
    } else if p.beta > lo && p.beta < hi {
        BetaCase::Nontrivial
    } else if stationary_spectra(p).iter().any(|sp| {
        let lo = sp.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = sp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        p.beta >= lo - tol && p.beta <= hi + tol
    }) {
        BetaCase::OtherStationary
    } else {
        BetaCase::NotCombination
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZhatReport {
    pub well: usize,
    /// `|(M13, M23)|` at the representative.
    pub off_axis: f64,
    pub zhat_eigenvector: bool,
    pub case: BetaCase,
    /// What the case analysis predicts, when it predicts anything.
    pub predicted: Option<bool>,
}

impl ZhatReport {
    pub fn consistent(&self) -> bool {
        self.predicted.is_none_or(|p| p == self.zhat_eigenvector)
    }
}

pub fn is_zhat_eigenvector(q: &QTensor, tol: f64) -> bool {
    let m = q.m_zhat();
    libm::hypot(m[0], m[1]) < tol
}

pub fn zhat_eigenvector_test(pot: &Potential) -> Vec<ZhatReport> {
    let p = &pot.params;
    let case = beta_case(p);
    let predicted = match case {
        BetaCase::Reduced | BetaCase::NotCombination | BetaCase::Trivial => Some(true),
        BetaCase::Nontrivial if p.gamma_s == 0.0 => Some(false),
        _ => None,
    };
    pot.wells
        .components
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let m = w.representative.m_zhat();
            let off_axis = libm::hypot(m[0], m[1]);
            ZhatReport {
                well: i,
                off_axis,
                zhat_eigenvector: off_axis < 1e-8,
                case,
                predicted,
            }
        })
        .collect()
}
