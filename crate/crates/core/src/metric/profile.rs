//! The boundary-layer profile `h' = √W(γ(h))`, `h(0) = 0`, along an arc-length
//! parametrized path `γ`, and the one-dimensional layer energies built from it.

use alloc::vec::Vec;

use super::{path_energy, TensorPath};
use crate::error::{Error, Result};
use crate::math::{linear_fit, ln};
use crate::potential::Potential;
use crate::qtensor::rotate_z;

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSolution {
    pub s_grid: Vec<f64>,
    pub h_values: Vec<f64>,
    /// Euclidean length of the path.
    pub b: f64,
}

impl ProfileSolution {
    pub fn is_strictly_increasing(&self) -> bool {
        self.h_values.windows(2).all(|w| w[1] > w[0])
    }
}

/// Integrates the profile ODE with classical fourth-order Runge–Kutta on `steps` uniform
/// steps of `[0, s_max]`.
pub fn profile_ode(path: &TensorPath, pot: &Potential, s_max: f64, steps: usize) -> Result<ProfileSolution> {
    let arcs = path.arc_lengths();
    let b = arcs[arcs.len() - 1];
    let steps = steps.max(1);
    let ds = s_max / steps as f64;
    let s_grid: Vec<f64> = (0..=steps).map(|k| ds * k as f64).collect();
    if b == 0.0 {
        return Ok(ProfileSolution {
            h_values: alloc::vec![0.0; steps + 1],
            s_grid,
            b,
        });
    }
    // W must stay positive before the end of the path
    let n = path.nodes.len();
    for k in 0..n - 1 {
        let mid = path.nodes[k].lerp(&path.nodes[k + 1], 0.5);
        if pot.w(&path.nodes[k]) <= 1e-14 || pot.w(&mid) <= 1e-14 && k < n - 2 {
            return Err(Error::Precondition(alloc::format!(
                "path touches a well before its end (node {k})"
            )));
        }
    }
    let rhs = |h: f64| pot.sqrt_w(&path.at_arc(&arcs, h.clamp(0.0, b)));
    let mut h_values = Vec::with_capacity(steps + 1);
    let mut h = 0.0;
    h_values.push(h);
    for _ in 0..steps {
        let k1 = rhs(h);
        let k2 = rhs(h + 0.5 * ds * k1);
        let k3 = rhs(h + 0.5 * ds * k2);
        let k4 = rhs(h + ds * k3);
        h = (h + ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).min(b);
        h_values.push(h);
    }
    Ok(ProfileSolution { s_grid, h_values, b })
}

/// Slope and `r²` of the regression of `ln(b − h)` on `s` over the second half of the grid
/// (excluding points where `b − h` is too small for `W` to be resolved against the shift).
pub fn tail_fit(sol: &ProfileSolution) -> (f64, f64) {
    let n = sol.s_grid.len();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in n / 2..n {
        let gap = sol.b - sol.h_values[k];
        if gap > 1e-6 * sol.b {
            xs.push(sol.s_grid[k]);
            ys.push(ln(gap));
        }
    }
    let (_, slope, r2) = linear_fit(&xs, &ys);
    (slope, r2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerTerms {
    pub s: Vec<f64>,
    /// `(dh/ds)²` by central differences, the gradient half of the density.
    pub gradient: Vec<f64>,
    /// `W(γ(h(s)))`, the potential half.
    pub potential: Vec<f64>,
}

/// Both halves of the layer density at the interior grid points, in the stretched
/// variable `s = d/ε` where they do not depend on `ε`.
pub fn layer_terms(sol: &ProfileSolution, path: &TensorPath, pot: &Potential) -> LayerTerms {
    let arcs = path.arc_lengths();
    let n = sol.s_grid.len();
    let mut out = LayerTerms {
        s: Vec::new(),
        gradient: Vec::new(),
        potential: Vec::new(),
    };
    for k in 1..n.saturating_sub(1) {
        let dh = (sol.h_values[k + 1] - sol.h_values[k - 1]) / (sol.s_grid[k + 1] - sol.s_grid[k - 1]);
        out.s.push(sol.s_grid[k]);
        out.gradient.push(dh * dh);
        out.potential.push(pot.w(&path.at_arc(&arcs, sol.h_values[k])).max(0.0));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerConfig {
    pub s_max: f64,
    pub steps: usize,
    /// Curvature of the boundary; the layer at distance `d` has length element `1 − κd`.
    pub kappa: f64,
}

/// `∫ (ε|∂_d R|² + W(R)/ε)(1 − κd) dd` for `R(d) = γ(h(d/ε))`, integrated by the trapezoid
/// rule up to `min(ε·s_max, 1/κ)`.
///
/// With `κ = 0` this is `∫ ((h')² + W) ds`, which equals `2 path_energy` up to
/// discretization; the curvature weight adds a term linear in `ε`.
pub fn layer_energy_1d(path: &TensorPath, pot: &Potential, eps: f64, cfg: &LayerConfig) -> Result<f64> {
    if path.euclidean_length() == 0.0 {
        return Ok(0.0);
    }
    let sol = profile_ode(path, pot, cfg.s_max, cfg.steps)?;
    let arcs = path.arc_lengths();
    let s_cut = if cfg.kappa > 0.0 {
        1.0 / (cfg.kappa * eps)
    } else {
        f64::INFINITY
    };
    let n = sol.s_grid.len();
    let ds = sol.s_grid[1] - sol.s_grid[0];
    let mut total = 0.0;
    for k in 0..n {
        let s = sol.s_grid[k];
        if s > s_cut {
            break;
        }
        let (lo, hi) = (k.saturating_sub(1), (k + 1).min(n - 1));
        let dh = (sol.h_values[hi] - sol.h_values[lo]) / (sol.s_grid[hi] - sol.s_grid[lo]);
        let w = pot.w(&path.at_arc(&arcs, sol.h_values[k])).max(0.0);
        let density = (dh * dh + w) * (1.0 - cfg.kappa * eps * s);
        let weight = if k == 0 || k + 1 == n || s + ds > s_cut {
            0.5
        } else {
            1.0
        };
        total += weight * density * ds;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyPath {
    pub path: TensorPath,
    /// Index of the first node of the segment that runs inside the well.
    pub tail_start: usize,
}

impl FamilyPath {
    /// `√W`-length of the part before the tail.
    pub fn layer_length(&self, pot: &Potential) -> f64 {
        path_energy(&TensorPath::new(self.path.nodes[..=self.tail_start].to_vec()), pot)
    }
}

/// The base path from `g(x₀)` to a well, conjugated by the rotation `r_θ` that carries
/// `g(x₀)` to `g(x)`, followed by `tail` nodes turning the endpoint back along the well
/// orbit to the base path's endpoint.
pub fn boundary_family(base: &TensorPath, theta: f64, tail: usize) -> FamilyPath {
    let mut nodes: Vec<_> = base.nodes.iter().map(|q| rotate_z(q, theta)).collect();
    let tail_start = nodes.len() - 1;
    if theta != 0.0 {
        let end = base.end();
        for k in 1..=tail {
            nodes.push(rotate_z(&end, theta * (1.0 - k as f64 / tail as f64)));
        }
    }
    FamilyPath {
        path: TensorPath::new(nodes),
        tail_start,
    }
}
