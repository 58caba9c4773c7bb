//! Defects: 8-connected clusters of nodes far from every well, each with the degree of the
//! field along a rectangle of nodes around it.

use alloc::vec::Vec;

use super::lambda::PhiTable;
use super::{Field2D, Grid2D};
use crate::error::Result;
use crate::qtensor::{loop_degree, Degree, LoopSample};

#[derive(Debug, Clone, PartialEq)]
pub struct Defect {
    pub nodes: Vec<usize>,
    /// Mean position of the cluster nodes.
    pub center: [f64; 2],
    /// `None` when no enclosing loop fits inside the domain.
    pub degree: Option<Degree>,
    pub touches_boundary: bool,
}

/// Clusters of inside nodes with `min_i φ_i(Q) > threshold`, ordered by their first node.
pub fn detect_defects(grid: &Grid2D, f: &Field2D, table: &PhiTable, threshold: f64) -> Result<Vec<Defect>> {
    let dom = &grid.domain;
    let (nx, ny) = (dom.nx, dom.ny);
    let phis = table.phi_field(grid, f)?;
    let hot: Vec<bool> = (0..dom.len())
        .map(|k| dom.mask[k] && phis.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min) > threshold)
        .collect();
    let mut seen = alloc::vec![false; dom.len()];
    let mut out = Vec::new();
    for start in 0..dom.len() {
        if !hot[start] || seen[start] {
            continue;
        }
        let mut nodes = Vec::new();
        let mut stack = alloc::vec![start];
        seen[start] = true;
        while let Some(k) = stack.pop() {
            nodes.push(k);
            let (i, j) = ((k % nx) as i64, (k / nx) as i64);
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                        continue;
                    }
                    let nk = b as usize * nx + a as usize;
                    if hot[nk] && !seen[nk] {
                        seen[nk] = true;
                        stack.push(nk);
                    }
                }
            }
        }
        nodes.sort_unstable();
        let touches_boundary = nodes.iter().any(|&k| grid.is_pinned(k));
        let mut center = [0.0; 2];
        for &k in &nodes {
            let p = dom.position_of(k);
            center[0] += p[0] / nodes.len() as f64;
            center[1] += p[1] / nodes.len() as f64;
        }
        let degree = if touches_boundary {
            None
        } else {
            enclosing_degree(grid, f, &nodes, &hot)
        };
        out.push(Defect {
            nodes,
            center,
            degree,
            touches_boundary,
        });
    }
    Ok(out)
}

/// Degree along the bounding rectangle of the cluster grown by 2, 3, ... nodes, using the
/// first rectangle that lies inside the domain, avoids hot nodes and is nondegenerate.
fn enclosing_degree(grid: &Grid2D, f: &Field2D, nodes: &[usize], hot: &[bool]) -> Option<Degree> {
    let nx = grid.domain.nx as i64;
    let ny = grid.domain.ny as i64;
    let (mut i0, mut i1, mut j0, mut j1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
    for &k in nodes {
        let (i, j) = ((k as i64) % nx, (k as i64) / nx);
        i0 = i0.min(i);
        i1 = i1.max(i);
        j0 = j0.min(j);
        j1 = j1.max(j);
    }
    for grow in 2..6 {
        let (a0, a1, b0, b1) = (i0 - grow, i1 + grow, j0 - grow, j1 + grow);
        if a0 < 0 || b0 < 0 || a1 >= nx || b1 >= ny {
            return None;
        }
        let mut ring = Vec::new();
        for i in a0..a1 {
            ring.push((i, b0));
        }
        for j in b0..b1 {
            ring.push((a1, j));
        }
        for i in (a0 + 1..=a1).rev() {
            ring.push((i, b1));
        }
        for j in (b0 + 1..=b1).rev() {
            ring.push((a0, j));
        }
        let idx: Vec<usize> = ring.iter().map(|(i, j)| (*j * nx + *i) as usize).collect();
        if idx.iter().any(|&k| !grid.domain.mask[k]) {
            return None;
        }
        if idx.iter().any(|&k| hot[k]) {
            continue;
        }
        let samples = idx.iter().map(|&k| f.values[k]).collect();
        if let Ok(d) = loop_degree(&LoopSample::closed_from(samples)) {
            return Some(d);
        }
    }
    None
}
