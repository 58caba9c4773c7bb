//! The degenerate distance `d(U, V) = inf ∫ √W(γ) |γ'|` and what is built on it.
//!
//! Paths are polylines in the five-coordinate space, so Euclidean lengths of paths are
//! Frobenius lengths. The discrete length of a polyline is `Σ √W(midpoint) |Δ|`.

mod dijkstra;
mod geodesic;
mod profile;

pub use dijkstra::{slice_distance, SliceDistance};
pub use geodesic::{geodesic, phi, Endpoint, Geodesic, GeodesicConfig};
pub use profile::{
    boundary_family, layer_energy_1d, layer_terms, profile_ode, tail_fit, FamilyPath, LayerConfig, LayerTerms,
    ProfileSolution,
};

use alloc::vec::Vec;

use crate::potential::Potential;
use crate::qtensor::QTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorPath {
    pub nodes: Vec<QTensor>,
}

impl TensorPath {
    pub fn new(nodes: Vec<QTensor>) -> Self {
        TensorPath { nodes }
    }

    /// `n ≥ 2` equally spaced nodes on the segment from `a` to `b`.
    pub fn straight(a: QTensor, b: QTensor, n: usize) -> Self {
        let n = n.max(2);
        TensorPath {
            nodes: (0..n).map(|k| a.lerp(&b, k as f64 / (n - 1) as f64)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn start(&self) -> QTensor {
        self.nodes[0]
    }

    pub fn end(&self) -> QTensor {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn reversed(&self) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        TensorPath { nodes }
    }

    /// Cumulative Euclidean arc length at each node.
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.nodes.windows(2) {
            acc += w[0].distance(&w[1]);
            out.push(acc);
        }
        out
    }

    pub fn euclidean_length(&self) -> f64 {
        self.arc_lengths().last().copied().unwrap_or(0.0)
    }

    /// Point at Euclidean arc length `t` (clamped to the path).
    pub fn at_arc(&self, arcs: &[f64], t: f64) -> QTensor {
        let n = self.nodes.len();
        if n == 1 || t <= 0.0 {
            return self.nodes[0];
        }
        if t >= arcs[n - 1] {
            return self.nodes[n - 1];
        }
        let k = arcs.partition_point(|&a| a <= t).clamp(1, n - 1) - 1;
        let seg = arcs[k + 1] - arcs[k];
        let u = if seg > 0.0 { (t - arcs[k]) / seg } else { 0.0 };
        self.nodes[k].lerp(&self.nodes[k + 1], u)
    }

    /// Resamples to `n` nodes equally spaced in Euclidean arc length; endpoints are kept
    /// bit-identical.
    pub fn resample_uniform(&self, n: usize) -> Self {
        let arcs = self.arc_lengths();
        let total = arcs[arcs.len() - 1];
        let n = n.max(2);
        let mut nodes: Vec<QTensor> = (0..n)
            .map(|k| self.at_arc(&arcs, total * k as f64 / (n - 1) as f64))
            .collect();
        nodes[0] = self.start();
        nodes[n - 1] = self.end();
        TensorPath { nodes }
    }

    /// Largest gap between consecutive nodes divided by the mean gap.
    pub fn gap_ratio(&self) -> f64 {
        let gaps: Vec<f64> = self.nodes.windows(2).map(|w| w[0].distance(&w[1])).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
        if mean == 0.0 {
            return 1.0;
        }
        gaps.iter().fold(0.0, |m: f64, g| m.max(*g)) / mean
    }
}

/// `Σ_k √W(midpoint_k) |node_{k+1} − node_k|`.
pub fn path_energy(path: &TensorPath, pot: &Potential) -> f64 {
    path.nodes
        .windows(2)
        .map(|w| pot.sqrt_w(&w[0].lerp(&w[1], 0.5)) * w[0].distance(&w[1]))
        .sum()
}

/// Adds the gradient of [`path_energy`] with respect to every node into `grad`.
pub(crate) fn path_energy_grad(nodes: &[QTensor], pot: &Potential, grad: &mut [QTensor]) -> f64 {
    let mut total = 0.0;
    for k in 0..nodes.len().saturating_sub(1) {
        let d = nodes[k + 1] - nodes[k];
        let len = d.norm();
        let mid = nodes[k].lerp(&nodes[k + 1], 0.5);
        let w = pot.w(&mid).max(0.0);
        let s = libm::sqrt(w);
        total += s * len;
        let ds = if w > 1e-300 {
            pot.grad_w(&mid) * (0.5 / s)
        } else {
            QTensor::ZERO
        };
        let along = if len > 0.0 { d * (s / len) } else { QTensor::ZERO };
        let half = ds * (0.5 * len);
        grad[k] += half - along;
        grad[k + 1] += half + along;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{calibrate, PotentialParams};
    use crate::qtensor::{rotate_z, uniaxial_in_plane};

    fn pot() -> Potential {
        calibrate(&PotentialParams::reduced(-1.0 / 3.0, -1.0, 1.0, 1.0), 40, 3).unwrap()
    }

    #[test]
    fn constant_and_in_well_paths_have_zero_energy() {
        let p = pot();
        let q = QTensor([0.1, 0.2, -0.3, 0.0, 0.4]);
        assert_eq!(path_energy(&TensorPath::new(alloc::vec![q; 5]), &p), 0.0);
        // chord midpoints leave the circle by the sagitta, so the value is O(step²)
        let arc = |n: usize, span: f64| {
            TensorPath::new(
                (0..n)
                    .map(|k| uniaxial_in_plane(1.0, span * k as f64 / n as f64))
                    .collect(),
            )
        };
        assert!(path_energy(&arc(50, 0.005), &p) < 1e-8);
        let (coarse, fine) = (path_energy(&arc(200, 3.0), &p), path_energy(&arc(400, 3.0), &p));
        assert!(fine < 0.3 * coarse);
    }

    #[test]
    fn refinement_changes_energy_little() {
        let p = pot();
        let a = uniaxial_in_plane(0.6, 0.0);
        let b = QTensor([0.2, 0.5, 0.1, 0.1, -0.1]);
        let curve = |n: usize| {
            TensorPath::new(
                (0..n)
                    .map(|k| {
                        let t = k as f64 / (n - 1) as f64;
                        rotate_z(&a.lerp(&b, t), 0.8 * t)
                    })
                    .collect(),
            )
        };
        let (e1, e2) = (path_energy(&curve(65), &p), path_energy(&curve(129), &p));
        assert!((e1 - e2).abs() < 0.01 * e2);
    }

    #[test]
    fn energy_gradient_matches_finite_differences() {
        let p = pot();
        let nodes: Vec<QTensor> = (0..6)
            .map(|k| QTensor([0.1 * k as f64, -0.2, 0.05 * k as f64, 0.1, -0.03 * k as f64]))
            .collect();
        let mut g = alloc::vec![QTensor::ZERO; nodes.len()];
        path_energy_grad(&nodes, &p, &mut g);
        let h = 1e-6;
        for k in 0..nodes.len() {
            for c in 0..5 {
                let mut plus = nodes.clone();
                let mut minus = nodes.clone();
                plus[k][c] += h;
                minus[k][c] -= h;
                let fd =
                    (path_energy(&TensorPath::new(plus), &p) - path_energy(&TensorPath::new(minus), &p)) / (2.0 * h);
                assert!((fd - g[k][c]).abs() < 1e-6, "{k} {c}: {fd} vs {}", g[k][c]);
            }
        }
    }

    #[test]
    fn resampling_keeps_endpoints_and_equalizes_gaps() {
        let path = TensorPath::new(alloc::vec![
            QTensor::ZERO,
            QTensor([0.1, 0.0, 0.0, 0.0, 0.0]),
            QTensor([1.0, 1.0, 0.0, 0.0, 0.0]),
        ]);
        let r = path.resample_uniform(17);
        assert_eq!(r.start(), path.start());
        assert_eq!(r.end(), path.end());
        assert!(r.gap_ratio() < 1.05);
    }
}
