//! The sharp-interface functional on polygonal partitions
//!
//! `F₀ = Σ_{i,j} φ_i(P_j) H¹(∂A_i ∩ ∂A_j) + Σ_i 2φ_i(g) H¹(∂A_i ∩ ∂Ω)`
//!
//! and the dumbbell experiment: a straight interface `PQ` across the neck, structured
//! perturbations of it and the calibration bound.
//!
//! Region boundaries are exact polygons. Boundary edges must be segments (or pieces of
//! segments) of the domain outline; every other edge must be matched by the reversed edge
//! of a region, possibly after splitting at T-junctions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{dumbbell_outline, Dumbbell, DumbbellSpec};
use crate::error::{input, Error, Result};
use crate::math::{abs, hypot, sqrt};
use crate::metric::{geodesic, phi, Endpoint, GeodesicConfig};
use crate::potential::Potential;
use crate::qtensor::QTensor;

type Pt = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    /// Well index, starting at 0.
    pub label: usize,
    /// Counterclockwise outer ring.
    pub outer: Vec<Pt>,
    /// Clockwise rings.
    pub holes: Vec<Vec<Pt>>,
}

impl Region {
    pub fn new(label: usize, outer: Vec<Pt>) -> Self {
        Region {
            label,
            outer,
            holes: Vec::new(),
        }
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.outer) + self.holes.iter().map(|h| signed_area(h)).sum::<f64>()
    }

    fn rings(&self) -> impl Iterator<Item = &Vec<Pt>> {
        core::iter::once(&self.outer).chain(self.holes.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalPartition {
    pub regions: Vec<Region>,
    /// Counterclockwise outline of the domain.
    pub outline: Vec<Pt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionCosts {
    /// `φ_i(P_j)`.
    pub interface: Vec<Vec<f64>>,
    /// `2φ_i(g)`.
    pub boundary: Vec<f64>,
}

impl PartitionCosts {
    /// Costs of the two-well functional `c₁|∂C∩∂Ω| + c₂|∂D∩∂Ω| + c₃|∂C∩∂D|`.
    pub fn two_well(c1: f64, c2: f64, c3: f64) -> Self {
        PartitionCosts {
            interface: alloc::vec![alloc::vec![0.0, 0.5 * c3], alloc::vec![0.5 * c3, 0.0]],
            boundary: alloc::vec![c1, c2],
        }
    }

    pub fn wells(&self) -> usize {
        self.boundary.len()
    }

    pub fn c1(&self) -> f64 {
        self.boundary[0]
    }

    pub fn c2(&self) -> f64 {
        self.boundary[1]
    }

    pub fn c3(&self) -> f64 {
        self.interface[0][1] + self.interface[1][0]
    }

    pub fn scaled(&self, t: f64) -> Self {
        PartitionCosts {
            interface: self
                .interface
                .iter()
                .map(|r| r.iter().map(|v| v * t).collect())
                .collect(),
            boundary: self.boundary.iter().map(|v| v * t).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.boundary.len();
        if n == 0 || self.interface.len() != n || self.interface.iter().any(|r| r.len() != n) {
            return Err(input("interface matrix must be square and match the boundary costs"));
        }
        for i in 0..n {
            if self.interface[i][i] != 0.0 {
                return Err(input("interface matrix must have a zero diagonal"));
            }
            for j in 0..n {
                let (a, b) = (self.interface[i][j], self.interface[j][i]);
                if !(a >= 0.0 && a.is_finite()) || abs(a - b) > 1e-12 * (1.0 + abs(a)) {
                    return Err(input("interface matrix must be symmetric, finite and nonnegative"));
                }
            }
            if !(self.boundary[i] >= 0.0 && self.boundary[i].is_finite()) {
                return Err(input("boundary costs must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub costs: PartitionCosts,
    /// `c₂ < c₁ + c₃`.
    pub strict_triangle: bool,
}

/// Interface costs `φ_i(P_j) = d(P_i, P_j)` and boundary costs `2φ_i(g)` for constant data `g`.
/// With two wells, well 0 must be the cheaper one at the boundary.
pub fn costs_from_metric(pot: &Potential, g: &QTensor, cfg: &GeodesicConfig) -> Result<CostReport> {
    let n = pot.wells.len();
    let mut interface = alloc::vec![alloc::vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = geodesic(&Endpoint::Well(i), &Endpoint::Well(j), pot, cfg)?.length;
            interface[i][j] = d;
            interface[j][i] = d;
        }
    }
    let mut boundary = Vec::with_capacity(n);
    for i in 0..n {
        boundary.push(2.0 * phi(i, g, pot, cfg)?.length);
    }
    let costs = PartitionCosts { interface, boundary };
    let strict_triangle = if n == 2 {
        if !(0.0 < costs.c1() && costs.c1() < costs.c2()) {
            return Err(Error::Precondition(format!(
                "boundary costs must satisfy 0 < c1 < c2, got c1 = {}, c2 = {}",
                costs.c1(),
                costs.c2()
            )));
        }
        costs.c2() < costs.c1() + costs.c3()
    } else {
        true
    };
    Ok(CostReport { costs, strict_triangle })
}

/// An oriented polygon edge and what lies across it.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Edge {
    region: usize,
    a: Pt,
    b: Pt,
    across: Across,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Across {
    Outline,
    Region(usize),
}

fn key(p: Pt) -> [u64; 2] {
    // +0.0 and -0.0 compare equal as points
    [(p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits()]
}

fn signed_area(ring: &[Pt]) -> f64 {
    let n = ring.len();
    let mut s = 0.0;
    for k in 0..n {
        let (p, q) = (ring[k], ring[(k + 1) % n]);
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

fn dist(a: Pt, b: Pt) -> f64 {
    hypot(b[0] - a[0], b[1] - a[1])
}

/// Distance from `p` to segment `ab` and the segment parameter of the nearest point.
fn seg_dist(p: Pt, a: Pt, b: Pt) -> (f64, f64) {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (hypot(a[0] + t * dx - p[0], a[1] + t * dy - p[1]), t)
}

/// Compensated summation.
#[derive(Default, Clone, Copy)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if abs(self.s) >= abs(x) {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

impl PolygonalPartition {
    pub fn domain_area(&self) -> f64 {
        signed_area(&self.outline)
    }

    fn scale(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.outline {
            for c in 0..2 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        hypot(hi[0] - lo[0], hi[1] - lo[1])
    }

    /// Checks orientation and coverage, then labels every edge with what lies across it.
    fn classify(&self, wells: usize) -> Result<Vec<Edge>> {
        let omega = self.domain_area();
        if !(omega > 0.0) {
            return Err(input("domain outline must be counterclockwise with positive area"));
        }
        let mut total = 0.0;
        for (r, reg) in self.regions.iter().enumerate() {
            if reg.label >= wells {
                return Err(input(format!(
                    "region {r} has label {} but only {wells} wells are costed",
                    reg.label
                )));
            }
            if reg.outer.len() < 3 || reg.holes.iter().any(|h| h.len() < 3) {
                return Err(input(format!("region {r} has a ring with fewer than three vertices")));
            }
            if !(signed_area(&reg.outer) > 0.0) || reg.holes.iter().any(|h| !(signed_area(h) < 0.0)) {
                return Err(input(format!(
                    "region {r}: outer ring must be counterclockwise and holes clockwise"
                )));
            }
            total += reg.area();
        }
        if abs(total - omega) > 1e-6 * omega {
            return Err(input(format!(
                "regions cover area {total} but the domain has area {omega}"
            )));
        }
        let tol = 1e-9 * self.scale();
        let n = self.outline.len();
        let mut outline_set = BTreeMap::new();
        for k in 0..n {
            outline_set.insert((key(self.outline[k]), key(self.outline[(k + 1) % n])), ());
        }
        let mut open: BTreeMap<([u64; 2], [u64; 2]), Vec<usize>> = BTreeMap::new();
        let mut edges = Vec::new();
        for (r, reg) in self.regions.iter().enumerate() {
            for ring in reg.rings() {
                let m = ring.len();
                for k in 0..m {
                    let (a, b) = (ring[k], ring[(k + 1) % m]);
                    if key(a) == key(b) {
                        continue;
                    }
                    let across = if outline_set.contains_key(&(key(a), key(b))) {
                        Some(Across::Outline)
                    } else {
                        None
                    };
                    edges.push(Edge {
                        region: r,
                        a,
                        b,
                        across: across.unwrap_or(Across::Region(usize::MAX)),
                    });
                    if across.is_none() {
                        open.entry((key(a), key(b))).or_default().push(edges.len() - 1);
                    }
                }
            }
        }
        // exact reverse matches
        let mut leftover = Vec::new();
        let pending: Vec<usize> = open.values().flatten().copied().collect();
        for e in pending {
            if edges[e].across != Across::Region(usize::MAX) {
                continue;
            }
            let rev = (key(edges[e].b), key(edges[e].a));
            let partner = open.get_mut(&rev).and_then(|v| {
                let pos = v.iter().position(|&o| edges[o].across == Across::Region(usize::MAX))?;
                Some(v.swap_remove(pos))
            });
            match partner {
                Some(o) => {
                    edges[e].across = Across::Region(edges[o].region);
                    edges[o].across = Across::Region(edges[e].region);
                }
                None => leftover.push(e),
            }
        }
        // pieces of outline segments
        let mut interior = Vec::new();
        for e in leftover {
            let (a, b) = (edges[e].a, edges[e].b);
            let on_outline = (0..n).any(|k| {
                let (p, q) = (self.outline[k], self.outline[(k + 1) % n]);
                let (da, ta) = seg_dist(a, p, q);
                let (db, tb) = seg_dist(b, p, q);
                da <= tol && db <= tol && tb > ta
            });
            if on_outline {
                edges[e].across = Across::Outline;
            } else {
                interior.push(e);
            }
        }
        if interior.is_empty() {
            return Ok(edges);
        }
        // split the remaining edges at T-junctions and match the pieces
        let cuts: Vec<Pt> = interior.iter().flat_map(|&e| [edges[e].a, edges[e].b]).collect();
        let mut pieces: Vec<Edge> = Vec::new();
        for &e in &interior {
            let Edge { region, a, b, .. } = edges[e];
            let mut ts: Vec<(f64, Pt)> = cuts
                .iter()
                .filter_map(|&c| {
                    let (d, t) = seg_dist(c, a, b);
                    (d <= tol && t > 0.0 && t < 1.0 && key(c) != key(a) && key(c) != key(b)).then_some((t, c))
                })
                .collect();
            ts.sort_by(|x, y| x.0.total_cmp(&y.0));
            ts.dedup_by(|x, y| key(x.1) == key(y.1));
            let mut prev = a;
            for (_, c) in ts.into_iter().chain(core::iter::once((1.0, b))) {
                pieces.push(Edge {
                    region,
                    a: prev,
                    b: c,
                    across: Across::Region(usize::MAX),
                });
                prev = c;
            }
        }
        let mut by_key: BTreeMap<([u64; 2], [u64; 2]), Vec<usize>> = BTreeMap::new();
        for (i, p) in pieces.iter().enumerate() {
            by_key.entry((key(p.a), key(p.b))).or_default().push(i);
        }
        for i in 0..pieces.len() {
            if pieces[i].across != Across::Region(usize::MAX) {
                continue;
            }
            let rev = (key(pieces[i].b), key(pieces[i].a));
            let partner = by_key.get_mut(&rev).and_then(|v| {
                let pos = v
                    .iter()
                    .position(|&o| o != i && pieces[o].across == Across::Region(usize::MAX))?;
                Some(v.swap_remove(pos))
            });
            match partner {
                Some(o) => {
                    pieces[i].across = Across::Region(pieces[o].region);
                    pieces[o].across = Across::Region(pieces[i].region);
                }
                None => {
                    let p = pieces[i];
                    return Err(input(format!(
                        "partition does not cover the domain: edge ({}, {})-({}, {}) of region {} borders nothing",
                        p.a[0], p.a[1], p.b[0], p.b[1], p.region
                    )));
                }
            }
        }
        edges.retain(|e| e.across != Across::Region(usize::MAX));
        edges.extend(pieces);
        Ok(edges)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct F0Value {
    /// `H¹(∂A_i ∩ ∂A_j)` for `i ≠ j`, symmetric.
    pub interface_lengths: Vec<Vec<f64>>,
    /// `H¹(∂A_i ∩ ∂Ω)` per label.
    pub boundary_lengths: Vec<f64>,
    pub interface: f64,
    pub boundary: f64,
    pub total: f64,
}

pub fn f0(partition: &PolygonalPartition, costs: &PartitionCosts) -> Result<F0Value> {
    costs.validate()?;
    let n = costs.wells();
    let edges = partition.classify(n)?;
    let label = |r: usize| partition.regions[r].label;
    let mut ilen = alloc::vec![alloc::vec![Sum::default(); n]; n];
    let mut blen = alloc::vec![Sum::default(); n];
    for e in &edges {
        let l = dist(e.a, e.b);
        match e.across {
            Across::Outline => blen[label(e.region)].add(l),
            // each shared edge is visited from both sides
            Across::Region(o) => ilen[label(e.region)][label(o)].add(0.5 * l),
        }
    }
    let interface_lengths: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        ilen[i][j].value() + ilen[j][i].value()
                    }
                })
                .collect()
        })
        .collect();
    let boundary_lengths: Vec<f64> = blen.iter().map(Sum::value).collect();
    let mut interface = Sum::default();
    let mut boundary = Sum::default();
    for i in 0..n {
        for j in 0..n {
            interface.add(costs.interface[i][j] * interface_lengths[i][j]);
        }
        boundary.add(costs.boundary[i] * boundary_lengths[i]);
    }
    let (interface, boundary) = (interface.value(), boundary.value());
    Ok(F0Value {
        interface_lengths,
        boundary_lengths,
        interface,
        boundary,
        total: interface + boundary,
    })
}

fn check_two_well(partition: &PolygonalPartition, costs: &PartitionCosts) -> Result<Vec<Edge>> {
    if costs.wells() != 2 {
        return Err(input("the calibration applies to two-well partitions"));
    }
    costs.validate()?;
    partition.classify(2)
}

/// Outward unit normal of an edge of a positively oriented ring, scaled by its length.
fn normal_times_length(a: Pt, b: Pt) -> Pt {
    [b[1] - a[1], a[0] - b[0]]
}

/// `c₃ (H¹(∂C∩∂D) − ∫_{∂C∩∂D} v·ν_C)`, where `C` is the union of label-0 regions and `v` a
/// unit vector.
pub fn calibration_gap(partition: &PolygonalPartition, costs: &PartitionCosts, v: Pt) -> Result<f64> {
    let edges = check_two_well(partition, costs)?;
    let mut gap = Sum::default();
    for e in &edges {
        if let Across::Region(o) = e.across {
            if partition.regions[e.region].label == 0 && partition.regions[o].label == 1 {
                let nl = normal_times_length(e.a, e.b);
                gap.add(dist(e.a, e.b) - (v[0] * nl[0] + v[1] * nl[1]));
            }
        }
    }
    Ok(costs.c3() * gap.value())
}

/// The right-hand side of the calibration inequality after Gauss–Green:
/// `∫_{∂C∩∂Ω} (c₁ − c₃ v·ν_Ω) + c₂ H¹(∂D∩∂Ω)`, never above `F₀(C, D)`.
pub fn calibration_bound(partition: &PolygonalPartition, costs: &PartitionCosts, v: Pt) -> Result<f64> {
    let edges = check_two_well(partition, costs)?;
    let (c1, c2, c3) = (costs.c1(), costs.c2(), costs.c3());
    let mut bound = Sum::default();
    for e in &edges {
        if e.across == Across::Outline {
            let l = dist(e.a, e.b);
            if partition.regions[e.region].label == 0 {
                let nl = normal_times_length(e.a, e.b);
                bound.add(c1 * l - c3 * (v[0] * nl[0] + v[1] * nl[1]));
            } else {
                bound.add(c2 * l);
            }
        }
    }
    Ok(bound.value())
}

/// `∫ |winding number|` of a closed polyline, by exact integration along `lines` horizontal
/// scanlines placed at the midpoints of equal bands.
pub fn abs_winding_area(curve: &[Pt], lines: usize) -> f64 {
    let n = curve.len();
    if n < 3 || lines == 0 {
        return 0.0;
    }
    let (lo, hi) = curve.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
        (l.min(p[1]), h.max(p[1]))
    });
    let dy = (hi - lo) / lines as f64;
    if !(dy > 0.0) {
        return 0.0;
    }
    let mut area = 0.0;
    let mut xs: Vec<(f64, i32)> = Vec::new();
    for k in 0..lines {
        let y = lo + (k as f64 + 0.5) * dy;
        xs.clear();
        for i in 0..n {
            let (a, b) = (curve[i], curve[(i + 1) % n]);
            if (a[1] <= y) != (b[1] <= y) {
                let t = (y - a[1]) / (b[1] - a[1]);
                xs.push((a[0] + t * (b[0] - a[0]), if b[1] > a[1] { 1 } else { -1 }));
            }
        }
        xs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut w = 0i32;
        for pair in xs.windows(2) {
            w += pair[0].1;
            area += (w.unsigned_abs() as f64) * (pair[1].0 - pair[0].0) * dy;
        }
    }
    area
}

/// The dumbbell with its outline and the candidate partition `(A, B)`: `A` (label 0) lies on
/// the side `x < x₀` where `v·ν_Ω` is larger, `B` (label 1) on the other side.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub dumbbell: Dumbbell,
    pub outline: Vec<Pt>,
    /// Cumulative arc length at each outline vertex.
    pub arc: Vec<f64>,
    pub perimeter: f64,
    pub p_index: usize,
    pub q_index: usize,
    pub partition: PolygonalPartition,
}

/// Normal direction of the straight candidate interface.
pub const V: Pt = [1.0, 0.0];

pub fn dumbbell_candidate(spec: &DumbbellSpec, spacing: f64) -> Result<Candidate> {
    if !(spacing > 0.0) {
        return Err(input("outline spacing must be positive"));
    }
    let db = spec.build()?;
    let pts = dumbbell_outline(&db, spacing);
    let outline: Vec<Pt> = pts.iter().map(|b| [b.x, b.y]).collect();
    let arc: Vec<f64> = pts.iter().map(|b| b.s).collect();
    let perimeter = arc[arc.len() - 1] + dist(outline[outline.len() - 1], outline[0]);
    let find = |t: Pt| outline.iter().position(|p| key(*p) == key(t));
    let (Some(p_index), Some(q_index)) = (find(db.p), find(db.q)) else {
        return Err(Error::Numerical("contact points are missing from the outline".into()));
    };
    let mut c = Candidate {
        dumbbell: db,
        outline,
        arc,
        perimeter,
        p_index,
        q_index,
        partition: PolygonalPartition {
            regions: Vec::new(),
            outline: Vec::new(),
        },
    };
    let (sp, sq) = (c.arc[p_index], c.arc[q_index]);
    c.partition = c.split(sp, sq, &[])?;
    Ok(c)
}

impl Candidate {
    fn point_at(&self, s: f64) -> (usize, Pt) {
        let s = crate::math::rem_euclid(s, self.perimeter);
        let k = match self.arc.binary_search_by(|a| a.total_cmp(&s)) {
            Ok(k) => return (k, self.outline[k]),
            Err(k) => k - 1,
        };
        let (a, b) = (self.outline[k], self.outline[(k + 1) % self.outline.len()]);
        let t = (s - self.arc[k]) / dist(a, b);
        (k, [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
    }

    /// Outline points from arc `from` counterclockwise to arc `to`, endpoints included.
    fn walk_ccw(&self, from: f64, to: f64) -> Vec<Pt> {
        let n = self.outline.len();
        let (kf, pf) = self.point_at(from);
        let (kt, pt) = self.point_at(to);
        let mut out = alloc::vec![pf];
        let mut k = (kf + 1) % n;
        let span = crate::math::rem_euclid(to - from, self.perimeter);
        if !(kf == kt && span < 0.5 * self.perimeter) {
            loop {
                if key(self.outline[k]) != key(pf) {
                    out.push(self.outline[k]);
                }
                if k == kt {
                    break;
                }
                k = (k + 1) % n;
            }
        }
        if key(*out.last().unwrap()) != key(pt) {
            out.push(pt);
        }
        out
    }

    /// Outline points along the shorter way from arc `from` to arc `to`.
    fn walk_short(&self, from: f64, to: f64) -> Vec<Pt> {
        let fwd = crate::math::rem_euclid(to - from, self.perimeter);
        if fwd <= 0.5 * self.perimeter {
            self.walk_ccw(from, to)
        } else {
            let mut w = self.walk_ccw(to, from);
            w.reverse();
            w
        }
    }

    /// Two-region partition with contacts at arcs `sp` (upper) and `sq` (lower) and the
    /// interface through `interior`, listed from the `Q` side to the `P` side.
    pub fn split(&self, sp: f64, sq: f64, interior: &[Pt]) -> Result<PolygonalPartition> {
        let mut a = self.walk_ccw(sp, sq);
        a.extend_from_slice(interior);
        let mut b = self.walk_ccw(sq, sp);
        b.extend(interior.iter().rev());
        for ring in [&a, &b] {
            if ring.len() < 3 || !(signed_area(ring) > 0.0) {
                return Err(input("degenerate split"));
            }
        }
        Ok(PolygonalPartition {
            regions: alloc::vec![Region::new(0, a), Region::new(1, b)],
            outline: self.outline.clone(),
        })
    }

    pub fn contact_arcs(&self) -> (f64, f64) {
        (self.arc[self.p_index], self.arc[self.q_index])
    }

    /// `|A Δ C| + |B Δ D|` for a split partition, from the region swept between the two
    /// interfaces.
    fn split_distance(&self, sp: f64, sq: f64, interior: &[Pt]) -> f64 {
        let (p0, q0) = self.contact_arcs();
        let mut curve = alloc::vec![self.outline[self.q_index]];
        curve.extend(self.walk_short(p0, sp));
        curve.extend(interior.iter().rev());
        curve.extend(self.walk_short(sq, q0));
        2.0 * abs_winding_area(&curve, 4000)
    }

    /// Polyline arc length along the upper neck on the `B` side of `P`, the room available
    /// to contact slides.
    fn slide_room(&self) -> f64 {
        let db = &self.dumbbell;
        let room_x = (db.neck_end - db.contact).min(db.neck_end + db.contact);
        let t = db.slope(db.neck_end);
        0.5 * room_x * sqrt(1.0 + t * t).min(2.0)
    }
}

/// Bounds on the `L¹` radius from the two smallness conditions of the calibration argument,
/// evaluated with `b₁ − a₁` equal to half the neck arc beyond the contact point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleDelta {
    /// Largest `δ` with `20√δ / (c₁ + c₃(1 − 10√δ κ∞) − c₂) < b₁ − a₁`.
    pub contact_bound: f64,
    /// Largest `δ` with `10√δ` below half the neck half-width at the contact, the slide
    /// room and the curvature radius.
    pub tube_bound: f64,
    pub delta: f64,
}

pub fn admissible_delta(c: &Candidate, costs: &PartitionCosts) -> AdmissibleDelta {
    let (c1, c2, c3) = (costs.c1(), costs.c2(), costs.c3());
    let db = &c.dumbbell;
    let kappa = db.spec.neck_convexity.max(1.0 / db.spec.bulb_radius);
    let room = c.slide_room();
    let ok = |t: f64| {
        let den = c1 + c3 * (1.0 - 10.0 * t * kappa) - c2;
        den > 0.0 && 20.0 * t / den < room
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while ok(hi) {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let contact_bound = lo * lo;
    let t_tube = 0.05 * db.half_width(db.contact).min(room).min(1.0 / kappa);
    let tube_bound = t_tube * t_tube;
    AdmissibleDelta {
        contact_bound,
        tube_bound,
        delta: contact_bound.min(tube_bound),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PerturbationKind {
    Jitter,
    Tilt,
    Translate,
    Slide,
    Island,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 5] = [
        PerturbationKind::Jitter,
        PerturbationKind::Tilt,
        PerturbationKind::Translate,
        PerturbationKind::Slide,
        PerturbationKind::Island,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PerturbationKind::Jitter => "jitter",
            PerturbationKind::Tilt => "tilt",
            PerturbationKind::Translate => "translate",
            PerturbationKind::Slide => "slide",
            PerturbationKind::Island => "island",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub id: usize,
    pub kind: PerturbationKind,
    pub l1: f64,
    pub f0: f64,
    pub delta_f0: f64,
    /// `F₀ − calibration bound`, which equals the calibration gap.
    pub bound_slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub candidate_f0: f64,
    pub delta_l1: f64,
    pub trials: Vec<Trial>,
    pub min_delta: f64,
    pub argmin: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationConfig {
    pub delta_l1: f64,
    pub trials: usize,
    pub seed: u64,
}

/// A trial partition with its `L¹` distance to the candidate, or `None` when the sample is
/// degenerate and must be redrawn.
fn sample(c: &Candidate, kind: PerturbationKind, size: f64, rng: &mut ChaCha8Rng) -> Option<(PolygonalPartition, f64)> {
    let (sp, sq) = c.contact_arcs();
    let p = c.outline[c.p_index];
    let q = c.outline[c.q_index];
    // arc shifts: increasing arc moves Q toward +x and P toward -x
    let shift = |rng: &mut ChaCha8Rng| size * rng.gen_range(0.05..1.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
    match kind {
        PerturbationKind::Jitter => {
            let m = rng.gen_range(1..=6);
            let pts: Vec<Pt> = (1..=m)
                .map(|k| {
                    let t = k as f64 / (m + 1) as f64;
                    [q[0] + size * rng.gen_range(-1.0..1.0), q[1] + t * (p[1] - q[1])]
                })
                .collect();
            Some((c.split(sp, sq, &pts).ok()?, c.split_distance(sp, sq, &pts)))
        }
        PerturbationKind::Tilt => {
            let d = shift(rng);
            Some((
                c.split(sp + d, sq + d, &[]).ok()?,
                c.split_distance(sp + d, sq + d, &[]),
            ))
        }
        PerturbationKind::Translate => {
            let d = shift(rng);
            Some((
                c.split(sp - d, sq + d, &[]).ok()?,
                c.split_distance(sp - d, sq + d, &[]),
            ))
        }
        PerturbationKind::Slide => {
            let d = shift(rng);
            let (sp, sq) = if rng.gen::<bool>() { (sp + d, sq) } else { (sp, sq + d) };
            Some((c.split(sp, sq, &[]).ok()?, c.split_distance(sp, sq, &[])))
        }
        PerturbationKind::Island => {
            let mut part = c.split(sp, sq, &[]).ok()?;
            let host = rng.gen_range(0..2usize);
            let r = size * rng.gen_range(0.2..1.0);
            let db = &c.dumbbell;
            let side = if host == 0 { -1.0 } else { 1.0 };
            let cx = db.contact + side * rng.gen_range(0.1..0.9) * db.bulb_center;
            let cy = rng.gen_range(-0.5..0.5) * db.half_width(0.0);
            let ring: Vec<Pt> = (0..6)
                .map(|k| {
                    let a = core::f64::consts::TAU * k as f64 / 6.0;
                    [cx + r * crate::math::cos(a), cy + r * crate::math::sin(a)]
                })
                .collect();
            // the island and its collar must sit inside the host away from every edge
            let host_ring = &part.regions[host].outer;
            let m = host_ring.len();
            let clear = (0..m).all(|k| seg_dist([cx, cy], host_ring[k], host_ring[(k + 1) % m]).0 > 2.0 * r);
            if !clear || !inside(host_ring, [cx, cy]) {
                return None;
            }
            let mut hole = ring.clone();
            hole.reverse();
            part.regions[host].holes.push(hole);
            part.regions.push(Region::new(1 - host, ring));
            let l1 = 2.0 * part.regions[2].area();
            Some((part, l1))
        }
    }
}

fn inside(ring: &[Pt], p: Pt) -> bool {
    let n = ring.len();
    let mut c = false;
    for k in 0..n {
        let (a, b) = (ring[k], ring[(k + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]) {
            c = !c;
        }
    }
    c
}

/// Structured perturbations of the candidate within the `L¹` ball, cycling through the
/// perturbation kinds. This samples a small family; it does not search all partitions.
pub fn perturbation_test(
    c: &Candidate,
    costs: &PartitionCosts,
    cfg: &PerturbationConfig,
) -> Result<PerturbationReport> {
    if !(cfg.delta_l1 > 0.0) || cfg.trials == 0 {
        return Err(input(
            "perturbation test needs a positive L1 radius and at least one trial",
        ));
    }
    let base = f0(&c.partition, costs)?.total;
    let neck = 2.0 * c.dumbbell.half_width(c.dumbbell.contact);
    let mut trials = Vec::with_capacity(cfg.trials);
    for id in 0..cfg.trials {
        let kind = PerturbationKind::ALL[id % PerturbationKind::ALL.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        // first guess of the displacement that sweeps an area of order δ
        let mut size = match kind {
            PerturbationKind::Island => sqrt(cfg.delta_l1 / 6.0),
            _ => cfg.delta_l1 / neck,
        };
        let mut accepted = None;
        for _ in 0..200 {
            let Some((part, l1)) = sample(c, kind, size, &mut rng) else {
                continue;
            };
            if l1 > cfg.delta_l1 {
                size *= 0.5;
                continue;
            }
            if !(l1 > 0.0) {
                continue;
            }
            let Ok(v) = f0(&part, costs) else {
                continue;
            };
            let bound = calibration_bound(&part, costs, V)?;
            accepted = Some(Trial {
                id,
                kind,
                l1,
                f0: v.total,
                delta_f0: v.total - base,
                bound_slack: v.total - bound,
            });
            break;
        }
        trials.push(
            accepted.ok_or_else(|| Error::Numerical(format!("no admissible {} perturbation found", kind.name())))?,
        );
    }
    let (argmin, min_delta) = trials
        .iter()
        .map(|t| t.delta_f0)
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, d)| if d < b.1 { (i, d) } else { b });
    Ok(PerturbationReport {
        candidate_f0: base,
        delta_l1: cfg.delta_l1,
        trials,
        min_delta,
        argmin,
        pass: min_delta > 0.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlideSweep {
    pub arc: Vec<f64>,
    pub delta_f0: Vec<f64>,
    /// `ΔF₀ ≈ a s² + b s + c`, as `[a, b, c]`.
    pub quadratic: [f64; 3],
    pub r2: f64,
}

/// Slides `P` along the upper neck by arcs in `[−s_max, s_max]` with `Q` fixed.
pub fn contact_slide(c: &Candidate, costs: &PartitionCosts, s_max: f64, points: usize) -> Result<SlideSweep> {
    if !(s_max > 0.0 && s_max <= c.slide_room()) || points < 3 {
        return Err(input(format!(
            "slide range must lie in (0, {}] with at least 3 points",
            c.slide_room()
        )));
    }
    let base = f0(&c.partition, costs)?.total;
    let (sp, sq) = c.contact_arcs();
    let mut arc = Vec::with_capacity(points);
    let mut delta = Vec::with_capacity(points);
    for k in 0..points {
        let s = -s_max + 2.0 * s_max * k as f64 / (points - 1) as f64;
        arc.push(s);
        delta.push(f0(&c.split(sp + s, sq, &[])?, costs)?.total - base);
    }
    let (quadratic, r2) = quadratic_fit(&arc, &delta)?;
    Ok(SlideSweep {
        arc,
        delta_f0: delta,
        quadratic,
        r2,
    })
}

/// Least squares `y ≈ a x² + b x + c` with its coefficient of determination.
pub fn quadratic_fit(x: &[f64], y: &[f64]) -> Result<([f64; 3], f64)> {
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let row = [xi * xi, xi, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            r[i] += row[i] * yi;
        }
    }
    let sol = solve3(m, r).ok_or_else(|| input("quadratic fit needs three distinct abscissae"))?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let f = sol[0] * xi * xi + sol[1] * xi + sol[2];
        ss_res += (yi - f) * (yi - f);
        ss_tot += (yi - mean) * (yi - mean);
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((sol, r2))
}

/// Gaussian elimination with partial pivoting.
pub(crate) fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(abs(*v)));
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| abs(m[a][col]).total_cmp(&abs(m[b][col])))?;
        if abs(m[piv][col]) <= 1e-14 * scale {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

/// Number of vertices of a ring after removing consecutive duplicates; helper for tests.
#[cfg(test)]
fn distinct(ring: &[Pt]) -> usize {
    let mut n = 0;
    for k in 0..ring.len() {
        if key(ring[k]) != key(ring[(k + 1) % ring.len()]) {
            n += 1;
        }
    }
    n
}
