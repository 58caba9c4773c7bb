use alloc::vec::Vec;

use super::{path_energy, path_energy_grad, TensorPath};
use crate::error::{Error, Result};
use crate::math::abs;
use crate::optim::{self, Method, Options};
use crate::potential::wells::closest_orbit_angle;
use crate::potential::{project_to_well, Potential, WellKind};
use crate::qtensor::{rotate_z, rotate_z_derivative, QTensor};

/// Either a fixed tensor or a well (by index into the calibrated well set).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    Point(QTensor),
    Well(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicConfig {
    pub nodes: usize,
    pub max_iters: usize,
    /// Relative change of the discrete length between relaxation cycles at which the
    /// relaxation stops.
    pub tol: f64,
    /// Optimizer iterations between arc-length reparametrizations.
    pub reparam_every: usize,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        GeodesicConfig {
            nodes: 64,
            max_iters: 20_000,
            tol: 1e-8,
            reparam_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geodesic {
    pub path: TensorPath,
    pub length: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// How an endpoint enters the optimization vector.
#[derive(Clone, Copy)]
enum End {
    Fixed(QTensor),
    /// `rotate_z(rep, θ)` with `θ` a free variable.
    Orbit(QTensor),
    /// Free coordinates, re-projected onto well `i` between cycles.
    Free(usize),
}

impl End {
    fn vars(&self) -> usize {
        match self {
            End::Fixed(_) => 0,
            End::Orbit(_) => 1,
            End::Free(_) => 5,
        }
    }
}

struct Layout {
    n: usize,
    start: End,
    end: End,
}

impl Layout {
    fn len(&self) -> usize {
        (self.n - 2) * 5 + self.start.vars() + self.end.vars()
    }

    fn end_node(&self, e: &End, vars: &[f64]) -> QTensor {
        match e {
            End::Fixed(q) => *q,
            End::Orbit(rep) => rotate_z(rep, vars[0]),
            End::Free(_) => QTensor([vars[0], vars[1], vars[2], vars[3], vars[4]]),
        }
    }

    fn unpack(&self, x: &[f64], nodes: &mut Vec<QTensor>) {
        nodes.clear();
        let sv = self.start.vars();
        let inner = (self.n - 2) * 5;
        nodes.push(self.end_node(&self.start, &x[..sv]));
        for k in 0..self.n - 2 {
            let o = sv + 5 * k;
            nodes.push(QTensor([x[o], x[o + 1], x[o + 2], x[o + 3], x[o + 4]]));
        }
        nodes.push(self.end_node(&self.end, &x[sv + inner..]));
    }

    fn pack_end(e: &End, node: &QTensor, out: &mut Vec<f64>) {
        match e {
            End::Fixed(_) => {}
            End::Orbit(rep) => out.push(closest_orbit_angle(rep, node)),
            End::Free(_) => out.extend_from_slice(&node.0),
        }
    }

    fn pack(&self, nodes: &[QTensor]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        Self::pack_end(&self.start, &nodes[0], &mut x);
        for q in &nodes[1..self.n - 1] {
            x.extend_from_slice(&q.0);
        }
        Self::pack_end(&self.end, &nodes[self.n - 1], &mut x);
        x
    }

    fn scatter_end(e: &End, vars: &[f64], g: &QTensor, out: &mut [f64]) {
        match e {
            End::Fixed(_) => {}
            End::Orbit(rep) => out[0] = g.dot(&rotate_z_derivative(rep, vars[0])),
            End::Free(_) => out.copy_from_slice(&g.0),
        }
    }

    fn scatter(&self, x: &[f64], g: &[QTensor], out: &mut [f64]) {
        let sv = self.start.vars();
        let inner = (self.n - 2) * 5;
        Self::scatter_end(&self.start, &x[..sv], &g[0], &mut out[..sv]);
        for k in 0..self.n - 2 {
            out[sv + 5 * k..sv + 5 * k + 5].copy_from_slice(&g[k + 1].0);
        }
        Self::scatter_end(&self.end, &x[sv + inner..], &g[self.n - 1], &mut out[sv + inner..]);
    }
}

fn resolve(pot: &Potential, e: &Endpoint, toward: &QTensor) -> Result<(End, QTensor)> {
    match *e {
        Endpoint::Point(q) => {
            if !q.is_finite() {
                return Err(Error::Input("endpoint must be finite".into()));
            }
            Ok((End::Fixed(q), q))
        }
        Endpoint::Well(i) => {
            let well = pot
                .wells
                .get(i)
                .ok_or_else(|| Error::Input(alloc::format!("no well with index {i}")))?;
            let near = project_to_well(pot, i, toward).unwrap_or(well.representative);
            let end = match well.kind {
                WellKind::Point => End::Fixed(well.representative),
                WellKind::Circle => End::Orbit(well.representative),
                WellKind::Sampled => End::Free(i),
            };
            Ok((end, near))
        }
    }
}

fn anchor(pot: &Potential, e: &Endpoint) -> Option<QTensor> {
    match *e {
        Endpoint::Point(q) => Some(q),
        Endpoint::Well(i) => pot.wells.get(i).map(|w| w.representative),
    }
}

/// Initial path: the lower of the straight chord and a rotate-then-interpolate curve that
/// follows the `ẑ`-rotation orbit of the start.
fn initial_path(pot: &Potential, a: QTensor, b: QTensor, n: usize) -> TensorPath {
    let chord = TensorPath::straight(a, b, n);
    let theta = closest_orbit_angle(&a, &b);
    let offset = b - rotate_z(&a, theta);
    let turned = TensorPath::new(
        (0..n)
            .map(|k| {
                let t = k as f64 / (n - 1) as f64;
                rotate_z(&a, theta * t) + offset * t
            })
            .collect(),
    );
    let mut turned = turned.resample_uniform(n);
    turned.nodes[n - 1] = b;
    if path_energy(&turned, pot) < path_energy(&chord, pot) {
        turned
    } else {
        chord
    }
}

/// Relaxes a discrete path between `u` and `v` to a local minimum of the discrete length.
///
/// Each cycle runs `reparam_every` quasi-Newton iterations and then redistributes the
/// nodes uniformly in Euclidean arc length. Endpoints on circle wells slide along the
/// circle; endpoints on sampled wells are re-projected onto the well after every cycle.
pub fn geodesic(u: &Endpoint, v: &Endpoint, pot: &Potential, cfg: &GeodesicConfig) -> Result<Geodesic> {
    let n = cfg.nodes.max(3);
    let toward = anchor(pot, v).ok_or_else(|| Error::Input("unknown well".into()))?;
    let (start, a) = resolve(pot, u, &toward)?;
    let (end, b) = resolve(pot, v, &a)?;

    if a.distance(&b) < 1e-14 {
        return Ok(Geodesic {
            path: TensorPath::new(alloc::vec![a; n]),
            length: 0.0,
            converged: true,
            iterations: 0,
        });
    }

    let layout = Layout { n, start, end };
    let mut path = initial_path(pot, a, b, n);
    let mut nodes = Vec::with_capacity(n);
    let mut gnodes = alloc::vec![QTensor::ZERO; n];
    let opts = Options {
        method: Method::QuasiNewton,
        max_iters: cfg.reparam_every.max(1),
        grad_tol: 1e-14,
        step_tol: 0.0,
        ..Options::default()
    };

    let mut length = path_energy(&path, pot);
    let mut iterations = 0;
    let mut converged = false;
    let mut cycles = 0;
    while iterations < cfg.max_iters {
        let mut x = layout.pack(&path.nodes);
        let report = optim::minimize(
            &mut x,
            |x, g| {
                layout.unpack(x, &mut nodes);
                gnodes.iter_mut().for_each(|q| *q = QTensor::ZERO);
                let val = path_energy_grad(&nodes, pot, &mut gnodes);
                layout.scatter(x, &gnodes, g);
                val
            },
            &opts,
            |_, _, _| {},
        );
        iterations += report.iterations.max(1);
        cycles += 1;
        layout.unpack(&x, &mut nodes);
        let mut relaxed = TensorPath::new(nodes.clone());
        for (idx, e) in [(0, layout.start), (n - 1, layout.end)] {
            if let End::Free(i) = e {
                if let Some(q) = project_to_well(pot, i, &relaxed.nodes[idx]) {
                    relaxed.nodes[idx] = q;
                }
            }
        }
        let new_length = path_energy(&relaxed, pot);
        let change = abs(length - new_length);
        length = new_length;
        let stalled = report.iterations == 0 || report.converged();
        if cycles >= 2 && (change <= cfg.tol * length.max(1.0) || stalled && change <= 1e-12) {
            path = relaxed;
            converged = true;
            break;
        }
        path = relaxed.resample_uniform(n);
    }
    let length = path_energy(&path, pot);
    Ok(Geodesic {
        path,
        length,
        converged,
        iterations,
    })
}

/// `φ_i(Q) = d(P_i, Q)`; the returned path runs from `Q` to the well.
pub fn phi(i: usize, q: &QTensor, pot: &Potential, cfg: &GeodesicConfig) -> Result<Geodesic> {
    geodesic(&Endpoint::Point(*q), &Endpoint::Well(i), pot, cfg)
}
