//! Shortest paths on a grid over the plane of tensors that are diagonal in the frame
//! `{n, ẑ×n, ẑ}`, used as an independent check of the relaxed geodesics.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::math::{abs, atan2, hypot, sqrt};
use crate::potential::{Potential, WellKind};
use crate::qtensor::{rotate_z, QTensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceDistance {
    pub distance: f64,
    pub grid_step: f64,
    pub targets: usize,
}

/// Unit vectors of the slice axes in `(q1, q2)`: the first is the direction of uniaxial
/// states with director `x̂`, so that the expected geodesic runs along a grid line.
const E1: [f64; 2] = [0.866_025_403_784_438_6, -0.5];
const E2: [f64; 2] = [0.5, 0.866_025_403_784_438_6];

fn embed(u: f64, v: f64) -> QTensor {
    QTensor([u * E1[0] + v * E2[0], u * E1[1] + v * E2[1], 0.0, 0.0, 0.0])
}

fn coords(q: &QTensor) -> (f64, f64) {
    (q[0] * E1[0] + q[1] * E1[1], q[0] * E2[0] + q[1] * E2[1])
}

fn in_slice(q: &QTensor) -> bool {
    abs(q[2]) < 1e-9 && abs(q[3]) < 1e-9 && abs(q[4]) < 1e-9
}

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

/// Distance from `from` to well `well` restricted to the diagonal slice through `from`,
/// computed by Dijkstra on an `n × n` eight-connected grid with edge weights
/// `√W(edge midpoint)·edge length`.
///
/// `from` must have `ẑ` as an eigenvector with its other eigenvectors in the plane; it is
/// first rotated about `ẑ` so the slice becomes the `(q1, q2)` plane.
pub fn slice_distance(pot: &Potential, from: &QTensor, well: usize, n: usize) -> Result<SliceDistance> {
    let n = n.max(8);
    let angle = if hypot(from[0], from[2]) > 1e-12 {
        0.5 * atan2(from[2], from[0])
    } else {
        0.0
    };
    let start = rotate_z(from, -angle);
    if !in_slice(&start) {
        return Err(Error::Precondition(
            "start tensor is not diagonal in a ẑ-adapted frame".into(),
        ));
    }
    let w = pot
        .wells
        .get(well)
        .ok_or_else(|| Error::Input(alloc::format!("no well with index {well}")))?;
    let candidates: Vec<QTensor> = match w.kind {
        WellKind::Circle => (0..4)
            .map(|k| rotate_z(&w.representative, k as f64 * core::f64::consts::FRAC_PI_4))
            .collect(),
        _ => w.samples.clone(),
    };
    let targets: Vec<(f64, f64)> = candidates
        .iter()
        .map(|q| {
            let mut q = *q;
            // circle samples come out of a rotation; clean rounding noise before the check
            for c in 2..5 {
                if abs(q[c]) < 1e-12 {
                    q[c] = 0.0;
                }
            }
            q
        })
        .filter(in_slice)
        .map(|q| coords(&q))
        .collect();
    if targets.is_empty() {
        return Err(Error::Precondition("well does not meet the slice".into()));
    }

    let (su, sv) = coords(&start);
    let mut lo = (su, sv);
    let mut hi = (su, sv);
    for t in &targets {
        lo = (lo.0.min(t.0), lo.1.min(t.1));
        hi = (hi.0.max(t.0), hi.1.max(t.1));
    }
    let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-3);
    let margin = 0.25 * span;
    let step = (span + 2.0 * margin) / (n - 1) as f64;
    // grid anchored so that the start is a node
    let i0 = libm::round((su - (lo.0 - margin)) / step) as i64;
    let j0 = libm::round((sv - (lo.1 - margin)) / step) as i64;
    let origin = (su - i0 as f64 * step, sv - j0 as f64 * step);
    let node_uv = |i: usize, j: usize| (origin.0 + i as f64 * step, origin.1 + j as f64 * step);
    let sqrt_w = |u: f64, v: f64| pot.sqrt_w(&embed(u, v));

    let mut is_target = alloc::vec![false; n * n];
    for t in &targets {
        let i = libm::round((t.0 - origin.0) / step).clamp(0.0, (n - 1) as f64) as usize;
        let j = libm::round((t.1 - origin.1) / step).clamp(0.0, (n - 1) as f64) as usize;
        is_target[i * n + j] = true;
    }

    let mut dist = alloc::vec![f64::INFINITY; n * n];
    let src = (i0.clamp(0, n as i64 - 1) as usize) * n + j0.clamp(0, n as i64 - 1) as usize;
    dist[src] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Item(0.0, src));
    let diag = sqrt(2.0) * step;
    let mut found = f64::INFINITY;
    while let Some(Item(d, idx)) = heap.pop() {
        if d > dist[idx] {
            continue;
        }
        if is_target[idx] {
            found = d;
            break;
        }
        let (i, j) = (idx / n, idx % n);
        let (u, v) = node_uv(i, j);
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 || ni >= n as i64 || nj >= n as i64 {
                    continue;
                }
                let len = if di != 0 && dj != 0 { diag } else { step };
                let mid = (u + 0.5 * di as f64 * step, v + 0.5 * dj as f64 * step);
                let nd = d + sqrt_w(mid.0, mid.1) * len;
                let nidx = ni as usize * n + nj as usize;
                if nd < dist[nidx] {
                    dist[nidx] = nd;
                    heap.push(Item(nd, nidx));
                }
            }
        }
    }
    if !found.is_finite() {
        return Err(Error::Numerical("no target reached".into()));
    }
    Ok(SliceDistance {
        distance: found,
        grid_step: step,
        targets: targets.len(),
    })
}
