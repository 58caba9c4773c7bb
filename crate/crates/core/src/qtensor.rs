//! Q-tensor algebra.
//!
//! A [`QTensor`] is a symmetric traceless 3×3 matrix stored as five coordinates in the
//! orthonormal basis (`tr(B_j B_k) = δ_jk`)
//!
//! ```text
//! B1 = (e1⊗e1 − e2⊗e2)/√2         B2 = (2 e3⊗e3 − e1⊗e1 − e2⊗e2)/√6
//! B3 = (e1⊗e2 + e2⊗e1)/√2         B4 = (e1⊗e3 + e3⊗e1)/√2
//! B5 = (e2⊗e3 + e3⊗e2)/√2
//! ```
//!
//! so the Euclidean norm of the coordinates equals the Frobenius norm of the matrix and
//! path lengths measured in coordinates are matrix lengths. Conjugation by a rotation of
//! angle `θ` about `ẑ` rotates `(q1, q3)` by `2θ`, rotates `(q4, q5)` by `θ` and fixes `q2`.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{input, Error, Result};
use crate::math::{abs, acos, atan2, cos, sin, sqrt, wrap_angle, TAU};

pub const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;
/// `1/√6`
pub const FRAC_1_SQRT_6: f64 = 0.408_248_290_463_863;

pub type Mat3 = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QTensor(pub [f64; 5]);

impl QTensor {
    pub const ZERO: QTensor = QTensor([0.0; 5]);

    pub const fn new(q: [f64; 5]) -> Self {
        QTensor(q)
    }

    pub fn coords(&self) -> &[f64; 5] {
        &self.0
    }

    pub fn to_matrix(&self) -> Mat3 {
        let [q1, q2, q3, q4, q5] = self.0;
        let d = q2 * FRAC_1_SQRT_6;
        let r = FRAC_1_SQRT_2;
        [
            [q1 * r - d, q3 * r, q4 * r],
            [q3 * r, -q1 * r - d, q5 * r],
            [q4 * r, q5 * r, 2.0 * d],
        ]
    }

    /// Coordinates of the symmetric traceless part of `m`.
    pub fn from_matrix(m: &Mat3) -> Self {
        let r = FRAC_1_SQRT_2;
        let s = |i: usize, j: usize| 0.5 * (m[i][j] + m[j][i]);
        QTensor([
            (m[0][0] - m[1][1]) * r,
            (2.0 * m[2][2] - m[0][0] - m[1][1]) * FRAC_1_SQRT_6,
            2.0 * s(0, 1) * r,
            2.0 * s(0, 2) * r,
            2.0 * s(1, 2) * r,
        ])
    }

    pub fn dot(&self, other: &QTensor) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    /// `tr(M²)`, equal to the squared Frobenius norm.
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.norm_sq())
    }

    pub fn det(&self) -> f64 {
        let m = self.to_matrix();
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// `tr(M³)`; for traceless matrices this is `3 det M`.
    pub fn tr_cube(&self) -> f64 {
        3.0 * self.det()
    }

    /// Coordinates of the traceless part of `M²`, i.e. `[tr(M² B_k)]_k`.
    pub fn square_coords(&self) -> QTensor {
        let m = self.to_matrix();
        let mut sq = [[0.0; 3]; 3];
        for (i, row) in sq.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| m[i][k] * m[k][j]).sum();
            }
        }
        QTensor::from_matrix(&sq)
    }

    /// Matrix entries `(M13, M23, M33)`, the components of `M ẑ`.
    pub fn m_zhat(&self) -> Vec3 {
        let [_, q2, _, q4, q5] = self.0;
        [q4 * FRAC_1_SQRT_2, q5 * FRAC_1_SQRT_2, 2.0 * q2 * FRAC_1_SQRT_6]
    }

    /// In-plane component `u = (M11 − M22, 2 M12)` used for the loop degree.
    pub fn in_plane(&self) -> [f64; 2] {
        [
            core::f64::consts::SQRT_2 * self.0[0],
            core::f64::consts::SQRT_2 * self.0[2],
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Largest absolute coordinate.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(abs(*v)))
    }

    pub fn lerp(&self, other: &QTensor, t: f64) -> QTensor {
        *self + (*other - *self) * t
    }

    pub fn distance(&self, other: &QTensor) -> f64 {
        (*self - *other).norm()
    }
}

impl Add for QTensor {
    type Output = QTensor;
    fn add(mut self, rhs: QTensor) -> QTensor {
        self += rhs;
        self
    }
}

impl AddAssign for QTensor {
    fn add_assign(&mut self, rhs: QTensor) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Sub for QTensor {
    type Output = QTensor;
    fn sub(mut self, rhs: QTensor) -> QTensor {
        self -= rhs;
        self
    }
}

impl SubAssign for QTensor {
    fn sub_assign(&mut self, rhs: QTensor) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
    }
}

impl Mul<f64> for QTensor {
    type Output = QTensor;
    fn mul(mut self, s: f64) -> QTensor {
        for a in self.0.iter_mut() {
            *a *= s;
        }
        self
    }
}

impl Neg for QTensor {
    type Output = QTensor;
    fn neg(self) -> QTensor {
        self * -1.0
    }
}

impl Index<usize> for QTensor {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for QTensor {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// `s (m⊗m − I/3)`; `m` must be a unit vector.
pub fn uniaxial(s: f64, m: Vec3) -> Result<QTensor> {
    let n = sqrt(m.iter().map(|v| v * v).sum());
    if abs(n - 1.0) > 1e-10 {
        return Err(input("director must be a unit vector"));
    }
    let mut mat = [[0.0; 3]; 3];
    for (i, row) in mat.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = s * m[i] * m[j];
        }
    }
    Ok(QTensor::from_matrix(&mat))
}

/// Uniaxial tensor with in-plane director at angle `angle` from `x̂`.
pub fn uniaxial_in_plane(s: f64, angle: f64) -> QTensor {
    // (m⊗m − I/3) for m = (cos a, sin a, 0) has q1 = cos 2a/√2, q2 = −1/√6, q3 = sin 2a/√2.
    QTensor([
        s * cos(2.0 * angle) * FRAC_1_SQRT_2,
        -s * FRAC_1_SQRT_6,
        s * sin(2.0 * angle) * FRAC_1_SQRT_2,
        0.0,
        0.0,
    ])
}

/// Uniaxial tensor with director `ẑ`.
pub fn uniaxial_zhat(s: f64) -> QTensor {
    QTensor([0.0, 2.0 * s * FRAC_1_SQRT_6, 0.0, 0.0, 0.0])
}

/// `r_θ Q r_θᵀ` for the rotation by `theta` about `ẑ`.
pub fn rotate_z(q: &QTensor, theta: f64) -> QTensor {
    let [q1, q2, q3, q4, q5] = q.0;
    let (s2, c2) = (sin(2.0 * theta), cos(2.0 * theta));
    let (s1, c1) = (sin(theta), cos(theta));
    QTensor([
        c2 * q1 - s2 * q3,
        q2,
        s2 * q1 + c2 * q3,
        c1 * q4 - s1 * q5,
        s1 * q4 + c1 * q5,
    ])
}

/// Derivative of [`rotate_z`] with respect to the angle, evaluated at `theta`.
pub fn rotate_z_derivative(q: &QTensor, theta: f64) -> QTensor {
    let r = rotate_z(q, theta);
    QTensor([-2.0 * r[2], 0.0, 2.0 * r[0], -r[4], r[3]])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenData {
    /// Eigenvalues in ascending order.
    pub lambda: [f64; 3],
    /// Orthonormal eigenvectors, `frame[i]` belonging to `lambda[i]`.
    pub frame: [Vec3; 3],
}

fn sub_diag(m: &Mat3, l: f64) -> Mat3 {
    let mut a = *m;
    for (i, row) in a.iter_mut().enumerate() {
        row[i] -= l;
    }
    a
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(v: Vec3) -> Option<Vec3> {
    let n = sqrt(dot3(&v, &v));
    (n > 1e-300).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

/// Flips `v` so that its largest-magnitude component (first on ties) is positive.
fn canonical_sign(v: Vec3) -> Vec3 {
    let mut k = 0;
    for i in 1..3 {
        if abs(v[i]) > abs(v[k]) + 1e-12 {
            k = i;
        }
    }
    if v[k] < 0.0 {
        [-v[0], -v[1], -v[2]]
    } else {
        v
    }
}

/// Null vector of the (numerically) rank-2 matrix `a` from the best row cross product.
fn null_vector(a: &Mat3) -> Option<Vec3> {
    let cands = [cross(&a[0], &a[1]), cross(&a[0], &a[2]), cross(&a[1], &a[2])];
    let best = cands.iter().copied().max_by(|x, y| dot3(x, x).total_cmp(&dot3(y, y)))?;
    normalize(best)
}

fn eigs_closed_form(m: &Mat3) -> Option<EigenData> {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let p2 = m[0][0] * m[0][0] + m[1][1] * m[1][1] + m[2][2] * m[2][2] + 2.0 * p1;
    let p = sqrt(p2 / 6.0);
    if p < 1e-150 {
        return None;
    }
    let mut b = *m;
    for row in b.iter_mut() {
        for v in row.iter_mut() {
            *v /= p;
        }
    }
    let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = acos(r) / 3.0;
    let l3 = 2.0 * p * cos(phi);
    let l1 = 2.0 * p * cos(phi + TAU / 3.0);
    let l2 = -l1 - l3;
    let lambda = [l1, l2, l3];
    let scale = p.max(1e-300);
    // Near-degenerate spectra make the cross-product vectors inaccurate.
    if (l2 - l1) < 1e-5 * scale || (l3 - l2) < 1e-5 * scale {
        return None;
    }
    let v1 = null_vector(&sub_diag(m, l1))?;
    let v3 = null_vector(&sub_diag(m, l3))?;
    let v3 = normalize({
        let d = dot3(&v1, &v3);
        [v3[0] - d * v1[0], v3[1] - d * v1[1], v3[2] - d * v1[2]]
    })?;
    let v2 = cross(&v3, &v1);
    Some(EigenData {
        lambda,
        frame: [canonical_sign(v1), canonical_sign(v2), canonical_sign(v3)],
    })
}

/// Cyclic Jacobi rotations; robust for any symmetric 3×3 input.
fn eigs_jacobi(m: &Mat3) -> EigenData {
    let mut a = *m;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _sweep in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= 1e-32 * diag.max(1e-300) || off == 0.0 {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (abs(theta) + sqrt(theta * theta + 1.0));
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / sqrt(t * t + 1.0);
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let col = |k: usize| canonical_sign([v[0][k], v[1][k], v[2][k]]);
    EigenData {
        lambda: [a[idx[0]][idx[0]], a[idx[1]][idx[1]], a[idx[2]][idx[2]]],
        frame: [col(idx[0]), col(idx[1]), col(idx[2])],
    }
}

fn residual(m: &Mat3, e: &EigenData) -> f64 {
    let mut worst: f64 = 0.0;
    for (l, v) in e.lambda.iter().zip(e.frame.iter()) {
        for i in 0..3 {
            let mv: f64 = (0..3).map(|j| m[i][j] * v[j]).sum();
            worst = worst.max(abs(mv - l * v[i]));
        }
    }
    worst
}

/// Eigen-decomposition of `Q`: closed-form trigonometric solution with a Jacobi fallback
/// for (near-)degenerate or inaccurate cases.
pub fn eigs(q: &QTensor) -> EigenData {
    let m = q.to_matrix();
    if let Some(e) = eigs_closed_form(&m) {
        if residual(&m, &e) <= 1e-11 * (1.0 + q.norm()) {
            return e;
        }
    }
    eigs_jacobi(&m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Isotropic,
    Uniaxial,
    Biaxial,
}

pub fn classify(q: &QTensor, tol: f64) -> Phase {
    let l = eigs(q).lambda;
    if l.iter().all(|v| abs(*v) < tol) {
        Phase::Isotropic
    } else if (l[1] - l[0]) < tol || (l[2] - l[1]) < tol {
        Phase::Uniaxial
    } else {
        Phase::Biaxial
    }
}

/// A half-integer, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Degree {
    twice: i64,
}

impl Degree {
    pub const ZERO: Degree = Degree { twice: 0 };

    pub const fn from_twice(twice: i64) -> Self {
        Degree { twice }
    }

    pub const fn from_int(k: i64) -> Self {
        Degree { twice: 2 * k }
    }

    /// Rounds `x` to the nearest multiple of one half.
    pub fn from_f64(x: f64) -> Self {
        Degree {
            twice: libm::round(2.0 * x) as i64,
        }
    }

    pub const fn twice(self) -> i64 {
        self.twice
    }

    pub fn as_f64(self) -> f64 {
        self.twice as f64 / 2.0
    }
}

impl Add for Degree {
    type Output = Degree;
    fn add(self, rhs: Degree) -> Degree {
        Degree {
            twice: self.twice + rhs.twice,
        }
    }
}

impl core::fmt::Display for Degree {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Tensors sampled in order around a closed curve.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSample {
    pub samples: Vec<QTensor>,
    pub closed: bool,
}

impl LoopSample {
    /// Builds a closed loop, appending the first sample at the end.
    pub fn closed_from(mut samples: Vec<QTensor>) -> Self {
        if let Some(first) = samples.first().copied() {
            if samples.last() != Some(&first) || samples.len() == 1 {
                samples.push(first);
            }
        }
        LoopSample { samples, closed: true }
    }
}

/// Half the winding number of `u = (Q11 − Q22, 2 Q12)` around the origin.
///
/// Open loops are closed by the segment from the last sample back to the first.
pub fn loop_degree(lp: &LoopSample) -> Result<Degree> {
    let s = &lp.samples;
    if s.is_empty() {
        return Ok(Degree::ZERO);
    }
    let mut angles = Vec::with_capacity(s.len());
    for (index, q) in s.iter().enumerate() {
        let u = q.in_plane();
        if u[0] * u[0] + u[1] * u[1] <= 1e-16 {
            return Err(Error::DegenerateLoop { index });
        }
        angles.push(atan2(u[1], u[0]));
    }
    let mut total = 0.0;
    for w in angles.windows(2) {
        total += wrap_angle(w[1] - w[0]);
    }
    if !lp.closed || s.first() != s.last() {
        total += wrap_angle(angles[0] - angles[angles.len() - 1]);
    }
    let winding = libm::round(total / TAU) as i64;
    Ok(Degree::from_twice(winding))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::PI;
    use proptest::prelude::*;

    fn mat_close(a: &Mat3, b: &Mat3, tol: f64) -> bool {
        (0..3).all(|i| (0..3).all(|j| abs(a[i][j] - b[i][j]) < tol))
    }

    fn arb_q() -> impl Strategy<Value = QTensor> {
        prop::array::uniform5(-2.0f64..2.0).prop_map(QTensor)
    }

    #[test]
    fn uniaxial_examples() {
        assert_eq!(uniaxial(0.0, [0.0, 0.0, 1.0]).unwrap(), QTensor::ZERO);
        let q = uniaxial(1.0, [0.0, 0.0, 1.0]).unwrap();
        let want = [[-1.0 / 3.0, 0.0, 0.0], [0.0, -1.0 / 3.0, 0.0], [0.0, 0.0, 2.0 / 3.0]];
        assert!(mat_close(&q.to_matrix(), &want, 1e-15));
        let l = eigs(&q).lambda;
        assert!(abs(l[0] + 1.0 / 3.0) < 1e-12 && abs(l[1] + 1.0 / 3.0) < 1e-12);
        assert!(abs(l[2] - 2.0 / 3.0) < 1e-12);
        assert!(uniaxial(1.0, [0.0, 0.0, 1.1]).is_err());
        assert!(uniaxial_zhat(1.0).distance(&q) < 1e-15);
    }

    #[test]
    fn in_plane_helper_matches_uniaxial() {
        for k in 0..8 {
            let a = 0.3 + k as f64;
            let q = uniaxial(0.7, [cos(a), sin(a), 0.0]).unwrap();
            assert!(q.distance(&uniaxial_in_plane(0.7, a)) < 1e-14);
        }
    }

    #[test]
    fn eigs_zero_and_degenerate() {
        let e = eigs(&QTensor::ZERO);
        assert_eq!(e.lambda, [0.0; 3]);
        let q = uniaxial(1.0, [1.0, 0.0, 0.0]).unwrap();
        let e = eigs(&q);
        assert!(abs(e.lambda[2] - 2.0 / 3.0) < 1e-12);
        assert!(abs(e.frame[2][0] - 1.0) < 1e-12);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&QTensor::ZERO, 1e-6), Phase::Isotropic);
        let u = uniaxial(1.0, [0.0, 0.0, 1.0]).unwrap();
        assert_eq!(classify(&u, 1e-6), Phase::Uniaxial);
        let b = QTensor::from_matrix(&[[-0.5, 0.0, 0.0], [0.0, 0.1, 0.0], [0.0, 0.0, 0.4]]);
        assert_eq!(classify(&b, 1e-6), Phase::Biaxial);
    }

    #[test]
    fn rotation_examples() {
        let q = QTensor([0.3, -0.2, 0.5, 0.1, -0.7]);
        assert_eq!(rotate_z(&q, 0.0), q);
        let u = uniaxial(0.8, [0.0, 0.0, 1.0]).unwrap();
        assert!(rotate_z(&u, 1.234).distance(&u) < 1e-15);
    }

    #[test]
    fn rotation_derivative_matches_finite_difference() {
        let q = QTensor([0.3, -0.2, 0.5, 0.1, -0.7]);
        let (t, h) = (0.4, 1e-6);
        let fd = (rotate_z(&q, t + h) - rotate_z(&q, t - h)) * (0.5 / h);
        assert!(fd.distance(&rotate_z_derivative(&q, t)) < 1e-8);
    }

    fn director_loop(winding: f64, beta: f64, n: usize) -> LoopSample {
        let samples = (0..n)
            .map(|i| {
                let t = TAU * i as f64 / n as f64;
                uniaxial_in_plane(-3.0 * beta, winding * t)
            })
            .collect();
        LoopSample::closed_from(samples)
    }

    /// Independent winding count: accumulate the director-tensor angle by brute force
    /// over 1024 samples without the wrap helper.
    fn brute_force_degree(lp: &LoopSample) -> f64 {
        let mut total = 0.0;
        for w in lp.samples.windows(2) {
            let a = w[0].to_matrix();
            let b = w[1].to_matrix();
            let ua = (a[0][0] - a[1][1], 2.0 * a[0][1]);
            let ub = (b[0][0] - b[1][1], 2.0 * b[0][1]);
            let cr = ua.0 * ub.1 - ua.1 * ub.0;
            let dt = ua.0 * ub.0 + ua.1 * ub.1;
            total += atan2(cr, dt);
        }
        total / (2.0 * TAU)
    }

    #[test]
    fn loop_degree_examples() {
        let constant = LoopSample::closed_from(alloc::vec![uniaxial_in_plane(0.6, 0.2); 10]);
        assert_eq!(loop_degree(&constant).unwrap(), Degree::ZERO);
        for (w, want) in [(1.0, 2), (2.0, 4), (0.5, 1), (-1.0, -2)] {
            let lp = director_loop(w, -0.2, 1024);
            let d = loop_degree(&lp).unwrap();
            assert_eq!(d.twice(), want);
            assert!(abs(brute_force_degree(&lp) - d.as_f64()) < 1e-9);
            // beta of the other sign flips the tensor but not the winding
            assert_eq!(loop_degree(&director_loop(w, 0.2, 1024)).unwrap().twice(), want);
        }
        let bad = LoopSample::closed_from(alloc::vec![uniaxial_zhat(1.0); 4]);
        assert!(matches!(loop_degree(&bad), Err(Error::DegenerateLoop { index: 0 })));
    }

    #[test]
    fn loop_degree_additive_through_basepoint() {
        let a = director_loop(1.0, -0.2, 256);
        let b = director_loop(0.5, -0.2, 256);
        let mut joined = a.samples.clone();
        joined.extend_from_slice(&b.samples[1..]);
        let total = loop_degree(&LoopSample {
            samples: joined,
            closed: true,
        })
        .unwrap();
        assert_eq!(total, loop_degree(&a).unwrap() + loop_degree(&b).unwrap());
    }

    proptest! {
        #[test]
        fn matrix_is_symmetric_traceless_with_frobenius_norm(q in arb_q()) {
            let m = q.to_matrix();
            prop_assert!(abs(m[0][0] + m[1][1] + m[2][2]) < 1e-12);
            for i in 0..3 { for j in 0..3 { prop_assert_eq!(m[i][j], m[j][i]); } }
            let fro: f64 = m.iter().flatten().map(|v| v * v).sum();
            prop_assert!(abs(sqrt(fro) - q.norm()) < 1e-12);
            let back = QTensor::from_matrix(&m);
            prop_assert!(back.distance(&q) < 1e-14);
        }

        #[test]
        fn eigen_residual_and_traces(q in arb_q()) {
            let e = eigs(&q);
            let m = q.to_matrix();
            prop_assert!(residual(&m, &e) < 1e-9 * (1.0 + q.norm()));
            prop_assert!(e.lambda[0] <= e.lambda[1] && e.lambda[1] <= e.lambda[2]);
            prop_assert!(abs(e.lambda.iter().sum::<f64>()) < 1e-10);
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!(abs(dot3(&e.frame[i], &e.frame[j]) - want) < 1e-10);
                }
            }
            let l2: f64 = e.lambda.iter().map(|l| l * l).sum();
            let l3: f64 = e.lambda.iter().map(|l| l * l * l).sum();
            prop_assert!(abs(l2 - q.norm_sq()) < 1e-9);
            prop_assert!(abs(l3 - q.tr_cube()) < 1e-9);
        }

        #[test]
        fn rotations_compose_and_preserve_norm(q in arb_q(), t1 in -PI..PI, t2 in -PI..PI) {
            let r = rotate_z(&rotate_z(&q, t1), t2);
            prop_assert!(r.distance(&rotate_z(&q, t1 + t2)) < 1e-10);
            prop_assert!(abs(rotate_z(&q, t1).norm() - q.norm()) < 1e-12);
            // agrees with explicit conjugation r_θ M r_θᵀ
            let (c, s) = (cos(t1), sin(t1));
            let rot = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
            let m = q.to_matrix();
            let mut out = [[0.0; 3]; 3];
            for i in 0..3 { for j in 0..3 {
                out[i][j] = (0..3).flat_map(|k| (0..3).map(move |l| (k, l)))
                    .map(|(k, l)| rot[i][k] * m[k][l] * rot[j][l]).sum();
            } }
            prop_assert!(mat_close(&out, &rotate_z(&q, t1).to_matrix(), 1e-12));
        }

        #[test]
        fn loop_degree_invariant_under_start_and_resampling(shift in 0usize..200, w in -3i64..4) {
            let lp = director_loop(w as f64 / 2.0, -0.2, 200);
            let mut s = lp.samples[..200].to_vec();
            s.rotate_left(shift);
            let shifted = LoopSample::closed_from(s);
            prop_assert_eq!(loop_degree(&shifted).unwrap(), Degree::from_twice(w));
            let coarse = director_loop(w as f64 / 2.0, -0.2, 64);
            prop_assert_eq!(loop_degree(&coarse).unwrap(), Degree::from_twice(w));
        }
    }
}
