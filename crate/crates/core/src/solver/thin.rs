//! The thin-film energy on `Ω × (0, 1)` with `N_z` equally spaced layers:
//!
//! `ε|∇_x Q|² + |∂_z Q|²/ε³ + (f_LdG − w_min)/ε` in the volume and `f_s/ε` on the top and
//! bottom faces. Lateral and bulk terms use trapezoid weights in `z`; for a field that does
//! not depend on `z` the total equals the planar energy up to rounding.

use alloc::vec::Vec;

use super::{Field2D, Grid2D, Solution, SolveConfig, TraceRow};
use crate::error::{input, Result};
use crate::math::abs;
use crate::optim;
use crate::potential::Potential;
use crate::qtensor::QTensor;

/// Layer-major values: layer `k` occupies `values[k·len .. (k+1)·len]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3D {
    pub nz: usize,
    pub values: Vec<QTensor>,
}

impl Field3D {
    /// The planar field repeated on `nz` layers.
    pub fn extrude(f: &Field2D, nz: usize) -> Result<Self> {
        if nz < 2 {
            return Err(input("thin-film fields need at least two layers"));
        }
        let mut values = Vec::with_capacity(nz * f.values.len());
        for _ in 0..nz {
            values.extend_from_slice(&f.values);
        }
        Ok(Field3D { nz, values })
    }

    pub fn layer(&self, k: usize) -> &[QTensor] {
        let len = self.values.len() / self.nz;
        &self.values[k * len..(k + 1) * len]
    }

    fn dz(&self) -> f64 {
        1.0 / (self.nz - 1) as f64
    }

    fn weight(&self, k: usize) -> f64 {
        if k == 0 || k + 1 == self.nz {
            0.5 * self.dz()
        } else {
            self.dz()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy3D {
    pub lateral: f64,
    pub vertical: f64,
    pub bulk: f64,
    pub surface: f64,
    pub total: f64,
}

fn evaluate(grid: &Grid2D, f: &Field3D, pot: &Potential, eps: f64, mut grad: Option<&mut [QTensor]>) -> Energy3D {
    let len = grid.domain.len();
    let h2 = grid.h() * grid.h();
    let dz = f.dz();
    let p = &pot.params;
    if let Some(g) = grad.as_deref_mut() {
        for v in g.iter_mut() {
            *v = QTensor::ZERO;
        }
    }
    let (mut lateral, mut vertical, mut bulk, mut surface) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..f.nz {
        let off = k * len;
        let wz = f.weight(k);
        let v = &f.values[off..off + len];
        for [a, b] in &grid.edges {
            let (a, b) = (*a as usize, *b as usize);
            let d = v[a] - v[b];
            lateral += wz * eps * d.norm_sq();
            if let Some(g) = grad.as_deref_mut() {
                g[off + a] += d * (2.0 * wz * eps);
                g[off + b] -= d * (2.0 * wz * eps);
            }
        }
        for &n in &grid.free {
            let q = &v[n];
            bulk += wz * h2 * (p.f_ldg(q) - pot.w_min) / eps;
            let top = k == 0 || k + 1 == f.nz;
            if top {
                surface += h2 * p.f_s(q) / eps;
            }
            if let Some(g) = grad.as_deref_mut() {
                g[off + n] += p.grad_f_ldg(q) * (wz * h2 / eps);
                if top {
                    g[off + n] += p.grad_f_s(q) * (h2 / eps);
                }
                if k + 1 < f.nz {
                    let d = f.values[off + len + n] - *q;
                    let c = h2 / (dz * eps * eps * eps);
                    vertical += c * d.norm_sq();
                    g[off + n] -= d * (2.0 * c);
                    g[off + len + n] += d * (2.0 * c);
                }
            } else if k + 1 < f.nz {
                let d = f.values[off + len + n] - *q;
                vertical += h2 / (dz * eps * eps * eps) * d.norm_sq();
            }
        }
        // the pinned ring carries half a cell, as in the planar energy
        for &n in &grid.pinned {
            let q = &v[n];
            bulk += 0.5 * wz * h2 * (p.f_ldg(q) - pot.w_min) / eps;
            if k == 0 || k + 1 == f.nz {
                surface += 0.5 * h2 * p.f_s(q) / eps;
            }
        }
    }
    if let Some(g) = grad {
        for k in 0..f.nz {
            for &n in &grid.pinned {
                g[k * len + n] = QTensor::ZERO;
            }
        }
    }
    Energy3D {
        lateral,
        vertical,
        bulk,
        surface,
        total: lateral + vertical + bulk + surface,
    }
}

pub fn energy_3d(grid: &Grid2D, f: &Field3D, pot: &Potential, eps: f64) -> Energy3D {
    evaluate(grid, f, pot, eps, None)
}

pub fn grad_energy_3d(grid: &Grid2D, f: &Field3D, pot: &Potential, eps: f64) -> Vec<QTensor> {
    let mut g = alloc::vec![QTensor::ZERO; f.values.len()];
    evaluate(grid, f, pot, eps, Some(&mut g));
    g
}

/// `(1/ε) |∫_{Ω×(0,1)} f_s − ∫_{Ω×{0}} f_s|`. The volume integral treats the field as
/// piecewise linear in `z` and is exact for that interpolant since `f_s` is quadratic.
pub fn surface_bulk_gap(grid: &Grid2D, f: &Field3D, pot: &Potential, eps: f64) -> f64 {
    let len = grid.domain.len();
    let h2 = grid.h() * grid.h();
    let dz = f.dz();
    let p = &pot.params;
    let mut volume = 0.0;
    let mut bottom = 0.0;
    for &n in &grid.free {
        bottom += h2 * p.f_s(&f.values[n]);
        for k in 0..f.nz - 1 {
            let (a, b) = (f.values[k * len + n], f.values[(k + 1) * len + n]);
            volume += h2 * dz * (p.f_s(&a) + 4.0 * p.f_s(&a.lerp(&b, 0.5)) + p.f_s(&b)) / 6.0;
        }
    }
    abs(volume - bottom) / eps
}

/// Local minimization of the thin-film energy; the lateral ring is pinned on every layer.
pub fn minimize_3d(grid: &Grid2D, f0: &Field3D, pot: &Potential, cfg: &SolveConfig) -> Result<Solution<Field3D>> {
    cfg.validate()?;
    let len = grid.domain.len();
    let nz = f0.nz;
    let nfree = grid.free.len();
    let mut x = alloc::vec![0.0; 5 * nfree * nz];
    let put = |x: &mut [f64], f: &Field3D| {
        for k in 0..nz {
            for (m, &n) in grid.free.iter().enumerate() {
                let s = 5 * (k * nfree + m);
                x[s..s + 5].copy_from_slice(&f.values[k * len + n].0);
            }
        }
    };
    let take = |x: &[f64], f: &mut Field3D| {
        for k in 0..nz {
            for (m, &n) in grid.free.iter().enumerate() {
                let s = 5 * (k * nfree + m);
                f.values[k * len + n].0.copy_from_slice(&x[s..s + 5]);
            }
        }
    };
    put(&mut x, f0);
    let mut work = f0.clone();
    let mut grad = alloc::vec![QTensor::ZERO; f0.values.len()];
    let mut trace = Vec::new();
    // the pointwise first variation is the gradient over the cell volume h²·dz
    let mut opts = cfg.options(grid.h());
    opts.grad_scale /= f0.dz();
    let report = optim::minimize(
        &mut x,
        |x, g| {
            take(x, &mut work);
            let e = evaluate(grid, &work, pot, cfg.eps, Some(&mut grad)).total;
            for k in 0..nz {
                for (m, &n) in grid.free.iter().enumerate() {
                    let s = 5 * (k * nfree + m);
                    g[s..s + 5].copy_from_slice(&grad[k * len + n].0);
                }
            }
            e
        },
        &opts,
        |iteration, energy, grad_norm| {
            trace.push(TraceRow {
                iteration,
                energy,
                grad_norm,
            })
        },
    );
    let mut field = f0.clone();
    take(&x, &mut field);
    Ok(Solution { field, trace, report })
}
