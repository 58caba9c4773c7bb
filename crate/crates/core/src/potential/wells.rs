use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{s_star, Potential, PotentialParams};
use crate::error::{Error, Result};
use crate::math::{abs, atan2, TAU};
use crate::optim::{self, Method, Options};
use crate::qtensor::{rotate_z, QTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum WellKind {
    Circle,
    Sampled,
    Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Well {
    pub kind: WellKind,
    /// For circles the representative is rotated so its in-plane part points along `x̂`.
    pub representative: QTensor,
    pub samples: Vec<QTensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WellSet {
    pub components: Vec<Well>,
    pub merge_radius: f64,
}

impl WellSet {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Well> {
        self.components.get(i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub starts: usize,
    pub seed: u64,
    /// Defaults to `0.05·max(1, |s*|)`.
    pub merge_radius: Option<f64>,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            starts: 200,
            seed: 0,
            merge_radius: None,
        }
    }
}

fn polish(p: &PotentialParams, q: QTensor, max_iters: usize) -> (QTensor, optim::Report) {
    let mut x = q.0;
    let opts = Options {
        method: Method::QuasiNewton,
        max_iters,
        grad_tol: 1e-13,
        ..Options::default()
    };
    let report = optim::minimize(
        &mut x,
        |x, g| {
            let q = QTensor([x[0], x[1], x[2], x[3], x[4]]);
            g.copy_from_slice(&p.grad_raw(&q).0);
            p.raw(&q)
        },
        &opts,
        |_, _, _| {},
    );
    (QTensor(x), report)
}

fn orbit(q: &QTensor, r_merge: f64) -> Vec<QTensor> {
    // spacing of at most r_merge/2 along the orbit, whose speed is at most 2|q|
    let m = libm::ceil(2.0 * TAU * q.norm() / (0.5 * r_merge)).clamp(8.0, 4096.0) as usize;
    (0..m).map(|k| rotate_z(q, TAU * k as f64 / m as f64)).collect()
}

fn distance_to_set(q: &QTensor, set: &[QTensor]) -> f64 {
    set.iter().map(|s| s.distance(q)).fold(f64::INFINITY, f64::min)
}

/// Rotation about `ẑ` that brings the in-plane part of `q` (or, if that vanishes, its
/// `(q4, q5)` part) onto the positive `x̂` direction.
fn normalizing_angle(q: &QTensor) -> f64 {
    if libm::hypot(q[0], q[2]) > 1e-9 {
        -0.5 * atan2(q[2], q[0])
    } else if libm::hypot(q[3], q[4]) > 1e-9 {
        -atan2(q[4], q[3])
    } else {
        0.0
    }
}

/// Finds `w_min` and the wells with the default options and the given start count and seed.
pub fn calibrate(p: &PotentialParams, starts: usize, seed: u64) -> Result<Potential> {
    calibrate_with(
        p,
        &Calibration {
            starts,
            seed,
            merge_radius: None,
        },
    )
}

/// Multi-start local minimization of `f_LdG + 2 f_s`, followed by single-linkage clustering
/// of the global minima, where each minimum is linked to everything near its `ẑ`-rotation
/// orbit.
pub fn calibrate_with(p: &PotentialParams, cal: &Calibration) -> Result<Potential> {
    p.validate()?;
    if cal.starts == 0 {
        return Err(Error::Input("starts must be at least 1".into()));
    }
    let ss = s_star(p);
    let scale = abs(ss.value).max(1.0);
    let r_merge = cal.merge_radius.unwrap_or(0.05 * scale);
    let radius = 3.0 * scale;

    let mut rng = ChaCha8Rng::seed_from_u64(cal.seed);
    let mut minima: Vec<(QTensor, f64)> = Vec::new();
    for _ in 0..cal.starts {
        let start = loop {
            let q = QTensor(core::array::from_fn(|_| rng.gen_range(-radius..radius)));
            if q.norm() <= radius {
                break q;
            }
        };
        let (q, report) = polish(p, start, 3000);
        if report.converged() && q.is_finite() {
            minima.push((q, report.value));
        }
    }
    if minima.is_empty() {
        return Err(Error::Numerical("no local minimization converged".into()));
    }
    let w_min = minima.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let keep_tol = 1e-8 * w_min.abs().max(1.0);
    let mut global: Vec<QTensor> = Vec::new();
    for (q, v) in &minima {
        if v - w_min <= keep_tol && global.iter().all(|g| g.distance(q) > 1e-6) {
            global.push(*q);
        }
    }

    // single linkage on orbits
    let orbits: Vec<Vec<QTensor>> = global.iter().map(|q| orbit(q, r_merge)).collect();
    let n = global.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if distance_to_set(&global[j], &orbits[i]) <= r_merge {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }

    let mut components = Vec::new();
    for root in 0..n {
        if find(&mut parent, root) != root {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&i| find(&mut parent, i) == root).collect();
        let best = *members
            .iter()
            .min_by(|&&i, &&j| p.raw(&global[i]).total_cmp(&p.raw(&global[j])))
            .unwrap_or(&root);
        let seed_q = global[best];
        let rep_orbit = &orbits[best];
        let extent = rep_orbit.iter().map(|o| o.distance(&seed_q)).fold(0.0, f64::max);
        let on_orbit = members
            .iter()
            .all(|&i| distance_to_set(&global[i], rep_orbit) <= 0.5 * r_merge);
        let kind = match (extent < r_merge, on_orbit) {
            (true, true) => WellKind::Point,
            (false, true) => WellKind::Circle,
            _ => WellKind::Sampled,
        };
        let mut rep = seed_q;
        if kind != WellKind::Point {
            rep = rotate_z(&rep, normalizing_angle(&rep));
        }
        rep = polish(p, rep, 500).0;
        if kind != WellKind::Point {
            rep = rotate_z(&rep, normalizing_angle(&rep));
        }
        let samples = match kind {
            WellKind::Point => alloc::vec![rep],
            WellKind::Circle => orbit(&rep, r_merge),
            WellKind::Sampled => {
                let mut s = Vec::new();
                for &i in &members {
                    for o in &orbits[i] {
                        if s.iter().all(|x: &QTensor| x.distance(o) > 0.25 * r_merge) {
                            s.push(*o);
                        }
                    }
                }
                s
            }
        };
        components.push(Well {
            kind,
            representative: rep,
            samples,
        });
    }
    components.sort_by(|x, y| {
        x.kind
            .cmp(&y.kind)
            .then(x.representative[1].total_cmp(&y.representative[1]))
    });

    let w_min = components
        .iter()
        .map(|c| p.raw(&c.representative))
        .fold(w_min, f64::min);
    Ok(Potential {
        params: *p,
        w_min,
        s_star: ss,
        wells: WellSet {
            components,
            merge_radius: r_merge,
        },
    })
}

/// Nearest point of well `i` to `q`: the closest point on the orbit for circles, the
/// representative for points, and a locally re-minimized nearest sample otherwise.
pub fn project_to_well(pot: &Potential, i: usize, q: &QTensor) -> Option<QTensor> {
    let well = pot.wells.get(i)?;
    Some(match well.kind {
        WellKind::Point => well.representative,
        WellKind::Circle => {
            let theta = closest_orbit_angle(&well.representative, q);
            rotate_z(&well.representative, theta)
        }
        WellKind::Sampled => {
            let near = well
                .samples
                .iter()
                .min_by(|a, b| a.distance(q).total_cmp(&b.distance(q)))
                .copied()
                .unwrap_or(well.representative);
            polish(&pot.params, near, 200).0
        }
    })
}

/// Angle `θ` minimizing `|rotate_z(rep, θ) − q|`.
pub(crate) fn closest_orbit_angle(rep: &QTensor, q: &QTensor) -> f64 {
    let m = 64;
    let dist = |t: f64| rotate_z(rep, t).distance(q);
    let mut best = 0.0;
    let mut best_d = f64::INFINITY;
    for k in 0..m {
        let t = TAU * k as f64 / m as f64;
        let d = dist(t);
        if d < best_d {
            best_d = d;
            best = t;
        }
    }
    // golden-section refinement on the bracketing interval
    let (mut lo, mut hi) = (best - TAU / m as f64, best + TAU / m as f64);
    let g = 0.618_033_988_749_894_9;
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if dist(a) < dist(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtensor::{uniaxial_in_plane, uniaxial_zhat};

    #[test]
    fn reduced_default_has_circle_and_point() {
        let p = PotentialParams::reduced(-1.0 / 3.0, -1.0, 1.0, 1.0);
        let pot = calibrate(&p, 60, 7).unwrap();
        assert_eq!(pot.wells.len(), 2);
        assert_eq!(pot.wells.components[0].kind, WellKind::Circle);
        assert_eq!(pot.wells.components[1].kind, WellKind::Point);
        assert!(
            pot.wells.components[0]
                .representative
                .distance(&uniaxial_in_plane(1.0, 0.0))
                < 1e-6
        );
        assert!(pot.wells.components[1].representative.distance(&uniaxial_zhat(1.0)) < 1e-6);
        assert!(abs(pot.w_min + 4.0 / 27.0) < 1e-12);
        for c in &pot.wells.components {
            assert!(pot.w(&c.representative) < 1e-8);
        }
    }

    #[test]
    fn projection_onto_circle() {
        let p = PotentialParams::reduced(-1.0 / 3.0, -1.0, 1.0, 1.0);
        let pot = calibrate(&p, 30, 1).unwrap();
        let q = uniaxial_in_plane(0.6, 0.9);
        let proj = project_to_well(&pot, 0, &q).unwrap();
        assert!(proj.distance(&uniaxial_in_plane(1.0, 0.9)) < 1e-6);
    }
}
