//! The pseudo-distance `Λ(Q₁, Q₂) = Σ_i ‖φ_i(Q₁) − φ_i(Q₂)‖_{L¹}` and minimization inside a
//! `Λ`-ball.
//!
//! `φ_i` is tabulated on the plane of diagonal tensors `(q1, q2)`: a tensor with `ẑ` as an
//! eigenvector is rotated about `ẑ` onto that plane, which leaves `φ_i` unchanged. Table
//! values come from a Dijkstra sweep out of the well with a 16-neighbour stencil and
//! Simpson edge weights, and are read by bilinear interpolation. Tensors off the table
//! fall back to a relaxed geodesic.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{minimize_with, Field2D, Grid2D, Solution, SolveConfig};
use crate::error::{Error, Result};
use crate::math::{abs, hypot};
use crate::metric::{phi, GeodesicConfig};
use crate::potential::{Potential, WellKind};
use crate::qtensor::{rotate_z, QTensor};

const STENCIL: [(i64, i64); 16] = [
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
    (1, 2),
    (2, 1),
    (-1, 2),
    (-2, 1),
    (1, -2),
    (2, -1),
    (-1, -2),
    (-2, -1),
];

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiTable {
    /// Nodes per axis.
    pub n: usize,
    /// The table covers `[−half, half]²`.
    pub half: f64,
    pub step: f64,
    /// One `n × n` table per well, row-major in `q2`.
    pub values: Vec<Vec<f64>>,
    /// Tensors with `|q4|, |q5|` up to this size are read from the table as if those
    /// components vanished; `φ_i` moves by at most `max √W` times the dropped part.
    pub off_plane_tol: f64,
    pot: Potential,
    geodesic: GeodesicConfig,
}

fn in_plane_slice(q: &QTensor) -> Option<(f64, f64)> {
    (abs(q[2]) < 1e-9 && abs(q[3]) < 1e-9 && abs(q[4]) < 1e-9).then_some((q[0], q[1]))
}

impl PhiTable {
    /// Tabulates every well on an `n × n` grid.
    pub fn build(pot: &Potential, n: usize) -> Result<Self> {
        let n = n.max(11) | 1;
        let mut sources: Vec<Vec<(f64, f64)>> = Vec::new();
        let mut reach: f64 = 1.0;
        for w in &pot.wells.components {
            let cands: Vec<QTensor> = match w.kind {
                WellKind::Circle => (0..8)
                    .map(|k| rotate_z(&w.representative, k as f64 * core::f64::consts::FRAC_PI_4))
                    .collect(),
                _ => {
                    let mut v = w.samples.clone();
                    v.push(w.representative);
                    v
                }
            };
            let pts: Vec<(f64, f64)> = cands
                .iter()
                .map(|q| {
                    let mut q = *q;
                    for c in 2..5 {
                        if abs(q[c]) < 1e-12 {
                            q[c] = 0.0;
                        }
                    }
                    q
                })
                .filter_map(|q| in_plane_slice(&q))
                .collect();
            if pts.is_empty() {
                return Err(Error::Precondition(
                    "a well does not meet the diagonal plane; tabulation needs it".into(),
                ));
            }
            for p in &pts {
                reach = reach.max(1.3 * hypot(p.0, p.1));
            }
            sources.push(pts);
        }
        let step = 2.0 * reach / (n - 1) as f64;
        let coord = |i: usize| -reach + i as f64 * step;
        let sqrt_w = |u: f64, v: f64| pot.sqrt_w(&QTensor([u, v, 0.0, 0.0, 0.0]));
        let node_w: Vec<f64> = (0..n * n).map(|k| sqrt_w(coord(k % n), coord(k / n))).collect();
        let cost = |a: (f64, f64), wa: f64, b: (f64, f64), wb: f64| {
            let m = sqrt_w(0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1));
            hypot(b.0 - a.0, b.1 - a.1) * (wa + 4.0 * m + wb) / 6.0
        };
        let mut values = Vec::with_capacity(sources.len());
        for src in &sources {
            let mut dist = alloc::vec![f64::INFINITY; n * n];
            let mut heap = BinaryHeap::new();
            for &(u, v) in src {
                let ws = sqrt_w(u, v);
                let (ci, cj) = (
                    libm::round((u + reach) / step) as i64,
                    libm::round((v + reach) / step) as i64,
                );
                for dj in -2..=2 {
                    for di in -2..=2 {
                        let (i, j) = (ci + di, cj + dj);
                        if i < 0 || j < 0 || i >= n as i64 || j >= n as i64 {
                            continue;
                        }
                        let k = j as usize * n + i as usize;
                        let d = cost((u, v), ws, (coord(i as usize), coord(j as usize)), node_w[k]);
                        if d < dist[k] {
                            dist[k] = d;
                            heap.push(Item(d, k));
                        }
                    }
                }
            }
            while let Some(Item(d, k)) = heap.pop() {
                if d > dist[k] {
                    continue;
                }
                let (i, j) = ((k % n) as i64, (k / n) as i64);
                let a = (coord(i as usize), coord(j as usize));
                for (di, dj) in STENCIL {
                    let (ni, nj) = (i + di, j + dj);
                    if ni < 0 || nj < 0 || ni >= n as i64 || nj >= n as i64 {
                        continue;
                    }
                    let nk = nj as usize * n + ni as usize;
                    let nd = d + cost(a, node_w[k], (coord(ni as usize), coord(nj as usize)), node_w[nk]);
                    if nd < dist[nk] {
                        dist[nk] = nd;
                        heap.push(Item(nd, nk));
                    }
                }
            }
            values.push(dist);
        }
        Ok(PhiTable {
            n,
            half: reach,
            step,
            values,
            off_plane_tol: 1e-4,
            pot: pot.clone(),
            geodesic: GeodesicConfig::default(),
        })
    }

    pub fn wells(&self) -> usize {
        self.values.len()
    }

    /// Table coordinates of `q`, or `None` when `q` is off the table.
    fn locate(&self, q: &QTensor) -> Option<(f64, f64)> {
        if abs(q[3]) > self.off_plane_tol || abs(q[4]) > self.off_plane_tol {
            return None;
        }
        let rho = hypot(q[0], q[2]);
        let (u, v) = ((rho + self.half) / self.step, (q[1] + self.half) / self.step);
        let top = (self.n - 1) as f64;
        (u <= top && v >= 0.0 && v <= top).then_some((u, v))
    }

    fn bilinear(&self, i: usize, u: f64, v: f64) -> (f64, f64, f64) {
        let top = self.n - 2;
        let (iu, iv) = ((u as usize).min(top), (v as usize).min(top));
        let (fu, fv) = (u - iu as f64, v - iv as f64);
        let t = &self.values[i];
        let at = |a: usize, b: usize| t[b * self.n + a];
        let (v00, v10, v01, v11) = (at(iu, iv), at(iu + 1, iv), at(iu, iv + 1), at(iu + 1, iv + 1));
        let val = v00 * (1.0 - fu) * (1.0 - fv) + v10 * fu * (1.0 - fv) + v01 * (1.0 - fu) * fv + v11 * fu * fv;
        let du = ((v10 - v00) * (1.0 - fv) + (v11 - v01) * fv) / self.step;
        let dv = ((v01 - v00) * (1.0 - fu) + (v11 - v10) * fu) / self.step;
        (val, du, dv)
    }

    /// `φ_i(q)`, from the table when possible.
    pub fn phi(&self, i: usize, q: &QTensor) -> Result<f64> {
        match self.locate(q) {
            Some((u, v)) => Ok(self.bilinear(i, u, v).0),
            None => Ok(phi(i, q, &self.pot, &self.geodesic)?.length),
        }
    }

    /// Table value and gradient with `q` clamped onto the table; the `q4, q5` components
    /// are ignored.
    pub fn phi_clamped(&self, i: usize, q: &QTensor) -> (f64, QTensor) {
        let rho = hypot(q[0], q[2]);
        let top = (self.n - 1) as f64;
        let u = ((rho + self.half) / self.step).min(top);
        let v = ((q[1] + self.half) / self.step).clamp(0.0, top);
        let (val, du, dv) = self.bilinear(i, u, v);
        let mut g = QTensor::ZERO;
        if rho > 0.0 {
            g[0] = du * q[0] / rho;
            g[2] = du * q[2] / rho;
        }
        g[1] = dv;
        (val, g)
    }

    /// `φ_i` at every inside node, one vector per well; outside nodes hold zero.
    pub fn phi_field(&self, grid: &Grid2D, f: &Field2D) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(self.wells());
        for i in 0..self.wells() {
            let mut v = alloc::vec![0.0; f.values.len()];
            for (k, q) in f.values.iter().enumerate() {
                if grid.domain.mask[k] {
                    v[k] = self.phi(i, q)?;
                }
            }
            out.push(v);
        }
        Ok(out)
    }
}

fn lambda_from(grid: &Grid2D, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let h2 = grid.h() * grid.h();
    let mut total = 0.0;
    for (pa, pb) in a.iter().zip(b) {
        for k in 0..pa.len() {
            if grid.domain.mask[k] {
                total += h2 * abs(pa[k] - pb[k]);
            }
        }
    }
    total
}

/// Cell-area weighted `Σ_i Σ_x |φ_i(Q₁(x)) − φ_i(Q₂(x))|` over inside nodes.
pub fn lambda_distance(grid: &Grid2D, f1: &Field2D, f2: &Field2D, table: &PhiTable) -> Result<f64> {
    let a = table.phi_field(grid, f1)?;
    let b = table.phi_field(grid, f2)?;
    Ok(lambda_from(grid, &a, &b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaBall {
    pub center: Field2D,
    pub delta: f64,
    pub mu: f64,
    /// A run counts as interior when the final `Λ` is below `delta − margin`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaOutcome {
    pub solution: Solution<Field2D>,
    pub lambda: f64,
    pub interior: bool,
}

/// Minimizes `G_ε + μ max(0, Λ(Q, center) − δ)²` starting from the center. The penalty
/// reads `φ` through [`PhiTable::phi_clamped`].
pub fn local_minimize_in_lambda_ball(
    grid: &Grid2D,
    ball: &LambdaBall,
    pot: &Potential,
    table: &PhiTable,
    cfg: &SolveConfig,
) -> Result<LambdaOutcome> {
    if !(ball.delta > 0.0 && ball.mu >= 0.0) {
        return Err(crate::error::input(
            "ball radius must be positive and penalty weight nonnegative",
        ));
    }
    let h2 = grid.h() * grid.h();
    let wells = table.wells();
    let center_phi: Vec<Vec<f64>> = (0..wells)
        .map(|i| ball.center.values.iter().map(|q| table.phi_clamped(i, q).0).collect())
        .collect();
    let mut node_grad = alloc::vec![QTensor::ZERO; ball.center.values.len()];
    let solution = minimize_with(grid, &ball.center, pot, cfg, |v, g| {
        if ball.mu == 0.0 {
            return 0.0;
        }
        let mut lam = 0.0;
        for q in node_grad.iter_mut() {
            *q = QTensor::ZERO;
        }
        for i in 0..wells {
            for &k in &grid.free {
                let (p, dp) = table.phi_clamped(i, &v[k]);
                let d = p - center_phi[i][k];
                lam += h2 * abs(d);
                let s = if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                node_grad[k] += dp * (h2 * s);
            }
        }
        let excess = lam - ball.delta;
        if excess <= 0.0 {
            return 0.0;
        }
        for &k in &grid.free {
            g[k] += node_grad[k] * (2.0 * ball.mu * excess);
        }
        ball.mu * excess * excess
    })?;
    let lambda = lambda_distance(grid, &solution.field, &ball.center, table)?;
    Ok(LambdaOutcome {
        interior: lambda < ball.delta - ball.margin,
        lambda,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{calibrate, PotentialParams};
    use crate::qtensor::uniaxial_in_plane;

    #[test]
    fn table_matches_geodesic_at_boundary_data() {
        let pot = calibrate(&PotentialParams::reduced(-1.0 / 3.0, -1.0, 1.0, 1.0), 40, 3).unwrap();
        let t = PhiTable::build(&pot, 201).unwrap();
        let g = uniaxial_in_plane(0.6, 0.4);
        let want = phi(0, &g, &pot, &GeodesicConfig::default()).unwrap().length;
        let got = t.phi(0, &g).unwrap();
        assert!(abs(got - want) < 0.03 * want, "{got} vs {want}");
        assert!(t.phi(0, &uniaxial_in_plane(1.0, 1.0)).unwrap() < 1e-3);
    }
}
