//! Discrete field energies on masked grids and their minimization under Dirichlet data.
//!
//! The planar energy is `G_ε(Q) = Σ_edges ε|Q_a − Q_b|² + Σ_nodes ω h² W(Q)/ε`: forward
//! differences on every grid edge joining two inside nodes, and the potential with weight
//! `ω = 1` on free nodes and `ω = 1/2` on the pinned ring. Inside nodes with an outside
//! 4-neighbour form the ring; they carry the boundary data pulled back through the
//! nearest-point projection and never move. The half weight is the trapezoid rule across
//! the layer that starts at the ring, whatever the ring's orientation, and removes an
//! `O(h/ε)` bias from the layer energy.

mod defects;
mod lambda;
mod thin;

pub use defects::{detect_defects, Defect};
pub use lambda::{lambda_distance, local_minimize_in_lambda_ball, LambdaBall, LambdaOutcome, PhiTable};
pub use thin::{energy_3d, grad_energy_3d, minimize_3d, surface_bulk_gap, Energy3D, Field3D};

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{BoundaryData, Domain2D};
use crate::error::{input, Result};
use crate::math::{hypot, tanh};
use crate::optim::{self, Method, Options, Report};
use crate::potential::{project_to_well, Potential};
use crate::qtensor::QTensor;

const NOT_FREE: u32 = u32::MAX;

/// A domain together with its pinned ring, free nodes and edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub domain: Domain2D,
    pub free: Vec<usize>,
    pub pinned: Vec<usize>,
    /// Grid edges joining two inside nodes.
    pub edges: Vec<[u32; 2]>,
    slot: Vec<u32>,
}

impl Grid2D {
    pub fn new(domain: Domain2D) -> Result<Self> {
        let (nx, ny) = (domain.nx, domain.ny);
        let inside = |i: i64, j: i64| {
            i >= 0 && j >= 0 && i < nx as i64 && j < ny as i64 && domain.mask[j as usize * nx + i as usize]
        };
        let mut free = Vec::new();
        let mut pinned = Vec::new();
        let mut edges = Vec::new();
        let mut slot = alloc::vec![NOT_FREE; nx * ny];
        for j in 0..ny as i64 {
            for i in 0..nx as i64 {
                if !inside(i, j) {
                    continue;
                }
                let k = j as usize * nx + i as usize;
                let ring = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|(di, dj)| !inside(i + di, j + dj));
                if ring {
                    pinned.push(k);
                } else {
                    slot[k] = free.len() as u32;
                    free.push(k);
                }
                if inside(i + 1, j) {
                    edges.push([k as u32, k as u32 + 1]);
                }
                if inside(i, j + 1) {
                    edges.push([k as u32, (k + nx) as u32]);
                }
            }
        }
        if free.is_empty() {
            return Err(input("domain has no free nodes at this resolution"));
        }
        Ok(Grid2D {
            domain,
            free,
            pinned,
            edges,
            slot,
        })
    }

    pub fn h(&self) -> f64 {
        self.domain.h
    }

    pub fn is_free(&self, k: usize) -> bool {
        self.slot[k] != NOT_FREE
    }

    pub fn is_pinned(&self, k: usize) -> bool {
        self.domain.mask[k] && !self.is_free(k)
    }

    /// Field with the boundary data on the pinned ring and `interior` on the free nodes.
    pub fn field_from<F: FnMut([f64; 2]) -> QTensor>(&self, bd: &BoundaryData, mut interior: F) -> Field2D {
        let mut values = alloc::vec![QTensor::ZERO; self.domain.len()];
        for &k in &self.pinned {
            values[k] = bd.at(&self.domain, self.domain.position_of(k));
        }
        for &k in &self.free {
            values[k] = interior(self.domain.position_of(k));
        }
        Field2D { values }
    }

    fn gather(&self, f: &Field2D, x: &mut [f64]) {
        for (n, &k) in self.free.iter().enumerate() {
            x[5 * n..5 * n + 5].copy_from_slice(&f.values[k].0);
        }
    }

    fn scatter(&self, x: &[f64], f: &mut Field2D) {
        for (n, &k) in self.free.iter().enumerate() {
            f.values[k].0.copy_from_slice(&x[5 * n..5 * n + 5]);
        }
    }
}

/// Values on every grid node; outside nodes hold zero and are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub values: Vec<QTensor>,
}

impl Field2D {
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(QTensor::is_finite)
    }

    /// Pointwise `rotate_z` by `theta`.
    pub fn rotated(&self, theta: f64) -> Field2D {
        Field2D {
            values: self.values.iter().map(|q| crate::qtensor::rotate_z(q, theta)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy2D {
    pub gradient: f64,
    pub potential: f64,
    pub total: f64,
}

pub fn energy_parts_2d(grid: &Grid2D, f: &Field2D, pot: &Potential, eps: f64) -> Energy2D {
    let v = &f.values;
    let gradient: f64 = eps
        * grid
            .edges
            .iter()
            .map(|[a, b]| (v[*a as usize] - v[*b as usize]).norm_sq())
            .sum::<f64>();
    let h2 = grid.h() * grid.h();
    let potential: f64 = h2 / eps * grid.free.iter().map(|&k| pot.w(&v[k])).sum::<f64>()
        + 0.5 * h2 / eps * grid.pinned.iter().map(|&k| pot.w(&v[k])).sum::<f64>();
    Energy2D {
        gradient,
        potential,
        total: gradient + potential,
    }
}

pub fn energy_2d(grid: &Grid2D, f: &Field2D, pot: &Potential, eps: f64) -> f64 {
    energy_parts_2d(grid, f, pot, eps).total
}

/// Energy and its gradient with respect to every node value (zero off the free nodes).
fn energy_and_grad(grid: &Grid2D, v: &[QTensor], pot: &Potential, eps: f64, grad: &mut [QTensor]) -> f64 {
    for g in grad.iter_mut() {
        *g = QTensor::ZERO;
    }
    let mut total = 0.0;
    for [a, b] in &grid.edges {
        let (a, b) = (*a as usize, *b as usize);
        let d = v[a] - v[b];
        total += eps * d.norm_sq();
        grad[a] += d * (2.0 * eps);
        grad[b] -= d * (2.0 * eps);
    }
    let c = grid.h() * grid.h() / eps;
    for &k in &grid.free {
        total += c * pot.w(&v[k]);
        grad[k] += pot.grad_w(&v[k]) * c;
    }
    for &k in &grid.pinned {
        total += 0.5 * c * pot.w(&v[k]);
        grad[k] = QTensor::ZERO;
    }
    total
}

pub fn grad_energy_2d(grid: &Grid2D, f: &Field2D, pot: &Potential, eps: f64) -> Vec<QTensor> {
    let mut g = alloc::vec![QTensor::ZERO; f.values.len()];
    energy_and_grad(grid, &f.values, pot, eps, &mut g);
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub eps: f64,
    pub max_iters: usize,
    /// Tolerance on the largest gradient entry divided by the cell area, which is the
    /// pointwise first variation and does not scale with the grid.
    pub grad_tol: f64,
    /// Relative energy decrease over ten iterations below which the run counts as
    /// converged; zero disables the test.
    pub value_tol: f64,
    pub method: Method,
    pub memory: usize,
    pub seed: u64,
}

impl SolveConfig {
    pub fn new(eps: f64) -> Self {
        SolveConfig {
            eps,
            max_iters: 20_000,
            grad_tol: 1e-6,
            value_tol: 1e-12,
            method: Method::QuasiNewton,
            memory: 8,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(input("eps must be positive"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(input("grad_tol must be positive"));
        }
        Ok(())
    }

    fn options(&self, h: f64) -> Options {
        Options {
            method: self.method,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            grad_scale: 1.0 / (h * h),
            step_tol: 0.0,
            value_tol: self.value_tol,
            value_window: 10,
            memory: self.memory,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<F> {
    pub field: F,
    pub trace: Vec<TraceRow>,
    pub report: Report,
}

/// Runs the optimizer over the free values of `f0`; `extra` may add a term to the
/// energy and its node gradient.
pub(crate) fn minimize_with<E>(
    grid: &Grid2D,
    f0: &Field2D,
    pot: &Potential,
    cfg: &SolveConfig,
    mut extra: E,
) -> Result<Solution<Field2D>>
where
    E: FnMut(&[QTensor], &mut [QTensor]) -> f64,
{
    cfg.validate()?;
    let mut work = f0.clone();
    let mut x = alloc::vec![0.0; 5 * grid.free.len()];
    grid.gather(f0, &mut x);
    let mut grad = alloc::vec![QTensor::ZERO; f0.values.len()];
    let mut extra_grad = alloc::vec![QTensor::ZERO; f0.values.len()];
    let mut trace = Vec::new();
    let report = optim::minimize(
        &mut x,
        |x, g| {
            grid.scatter(x, &mut work);
            let mut e = energy_and_grad(grid, &work.values, pot, cfg.eps, &mut grad);
            for v in extra_grad.iter_mut() {
                *v = QTensor::ZERO;
            }
            e += extra(&work.values, &mut extra_grad);
            for (n, &k) in grid.free.iter().enumerate() {
                let s = grad[k] + extra_grad[k];
                g[5 * n..5 * n + 5].copy_from_slice(&s.0);
            }
            e
        },
        &cfg.options(grid.h()),
        |iteration, energy, grad_norm| {
            trace.push(TraceRow {
                iteration,
                energy,
                grad_norm,
            })
        },
    );
    let mut field = f0.clone();
    grid.scatter(&x, &mut field);
    Ok(Solution { field, trace, report })
}

/// Local minimization of the planar energy from `f0`; pinned values are left untouched.
pub fn minimize(grid: &Grid2D, f0: &Field2D, pot: &Potential, cfg: &SolveConfig) -> Result<Solution<Field2D>> {
    minimize_with(grid, f0, pot, cfg, |_, _| 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    /// Length scale of the amplitude taper around `center`; no taper when `None`.
    pub taper: Option<f64>,
    pub center: [f64; 2],
    /// Amplitude of uniform random noise added to every coordinate of free values.
    pub noise: f64,
    pub seed: u64,
}

/// Starting field: the pulled-back data projected onto its Euclidean-nearest well,
/// optionally scaled by `tanh(|x − center|/taper)`, plus seeded noise.
pub fn initial_field(grid: &Grid2D, bd: &BoundaryData, pot: &Potential, init: &InitConfig) -> Field2D {
    let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
    let dom = &grid.domain;
    grid.field_from(bd, |x| {
        let g = bd.at(dom, x);
        let mut best = (f64::INFINITY, g);
        for i in 0..pot.wells.len() {
            if let Some(p) = project_to_well(pot, i, &g) {
                let d = p.distance(&g);
                if d < best.0 {
                    best = (d, p);
                }
            }
        }
        let mut q = best.1;
        if let Some(len) = init.taper {
            q = q * tanh(hypot(x[0] - init.center[0], x[1] - init.center[1]) / len);
        }
        if init.noise > 0.0 {
            for c in 0..5 {
                q[c] += init.noise * rng.gen_range(-1.0..1.0);
            }
        }
        q
    })
}
