//! Planar computational domains on masked uniform grids, with the boundary as an oriented
//! closed polyline, nearest-point projection, tubular coordinates and Dirichlet data.
//!
//! Grid node `(i, j)` sits at `origin + (i h, j h)`; a node is inside when its signed
//! distance (positive inside) is strictly positive. The boundary polyline runs
//! counterclockwise, `s` is its arc length from the first vertex and `ν` is the outward
//! normal.

use alloc::vec::Vec;

use crate::error::{input, Result};
use crate::math::{abs, atan2, ceil, cos, floor, hypot, rem_euclid, sin, sqrt, PI, TAU};
use crate::qtensor::{uniaxial_in_plane, uniaxial_zhat, Degree, QTensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub nx: f64,
    pub ny: f64,
}

/// Neck-and-bulbs geometry. The neck is `|y| < w(x) = w₀ + κ x²/2`; each bulb is a disk
/// of radius `R` centered on the `x` axis and tangent to the neck graphs, which fixes the
/// neck extent and the bulb separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumbbellSpec {
    pub neck_half_width: f64,
    pub neck_convexity: f64,
    pub bulb_radius: f64,
    /// `(c₁, c₂, c₃)`.
    pub costs: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dumbbell {
    pub spec: DumbbellSpec,
    /// The neck graphs run over `[−neck_end, neck_end]`.
    pub neck_end: f64,
    /// Bulb centers are `(±bulb_center, 0)`.
    pub bulb_center: f64,
    pub separation: f64,
    /// `x₀`, where `v·ν = (c₁ − c₂)/c₃` with `v = x̂`.
    pub contact: f64,
    pub p: [f64; 2],
    pub q: [f64; 2],
}

impl DumbbellSpec {
    pub fn validate(&self) -> Result<()> {
        let [c1, c2, c3] = self.costs;
        if !(self.neck_half_width > 0.0 && self.neck_convexity > 0.0) {
            return Err(input("neck half-width and convexity must be positive"));
        }
        if !(self.bulb_radius > self.neck_half_width) {
            return Err(input("bulb radius must exceed the neck half-width"));
        }
        // c1 = c2 is admitted as the symmetric limit with the contact at the neck minimum
        if !(0.0 < c1 && c1 <= c2) {
            return Err(input("costs must satisfy 0 < c1 <= c2"));
        }
        if !(c2 < c1 + c3) {
            return Err(input("costs must satisfy c2 < c1 + c3"));
        }
        Ok(())
    }

    /// Resolves the tangency and contact conditions.
    pub fn build(&self) -> Result<Dumbbell> {
        self.validate()?;
        let (w0, k, r) = (self.neck_half_width, self.neck_convexity, self.bulb_radius);
        let w = |x: f64| w0 + 0.5 * k * x * x;
        // the bulb normal at the tangency point has length w√(1 + w'²), increasing in x
        let g = |x: f64| w(x) * sqrt(1.0 + k * k * x * x) - r;
        let (mut lo, mut hi) = (0.0, 1.0);
        while g(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let xn = 0.5 * (lo + hi);
        let xc = xn + w(xn) * k * xn;
        let [c1, c2, c3] = self.costs;
        let ratio = (c2 - c1) / c3;
        let slope = ratio / sqrt(1.0 - ratio * ratio);
        let x0 = slope / k;
        if x0 >= xn {
            return Err(input(alloc::format!(
                "contact abscissa {x0} lies outside the neck (neck ends at {xn}); increase the bulb radius or the neck convexity"
            )));
        }
        Ok(Dumbbell {
            spec: *self,
            neck_end: xn,
            bulb_center: xc,
            separation: 2.0 * xc,
            contact: x0,
            p: [x0, w(x0)],
            q: [x0, -w(x0)],
        })
    }
}

impl Dumbbell {
    pub fn half_width(&self, x: f64) -> f64 {
        self.spec.neck_half_width + 0.5 * self.spec.neck_convexity * x * x
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.spec.neck_convexity * x
    }

    /// Outward unit normal of the upper neck graph at abscissa `x`.
    pub fn upper_normal(&self, x: f64) -> [f64; 2] {
        let t = self.slope(x);
        let n = sqrt(1.0 + t * t);
        [-t / n, 1.0 / n]
    }

    /// Angle at the right bulb center of the upper tangency point.
    fn tangency_angle(&self) -> f64 {
        atan2(self.half_width(self.neck_end), self.neck_end - self.bulb_center)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disk {
        radius: f64,
    },
    /// The rectangle `[0, length] × [0, height]`.
    Strip {
        length: f64,
        height: f64,
    },
    Dumbbell(Dumbbell),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// `σ(x)`.
    pub point: [f64; 2],
    /// Signed distance, positive inside.
    pub d: f64,
    /// Outward normal at `σ(x)`.
    pub normal: [f64; 2],
    /// Arc coordinate of `σ(x)`.
    pub s: f64,
    pub out_of_tube: bool,
}

/// Bucket grid over the polyline segments for nearest-segment queries.
#[derive(Debug, Clone, PartialEq)]
struct SegmentIndex {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl SegmentIndex {
    fn new(pts: &[BoundaryPoint], lo: [f64; 2], hi: [f64; 2], cell: f64) -> Self {
        let nx = ((hi[0] - lo[0]) / cell) as usize + 1;
        let ny = ((hi[1] - lo[1]) / cell) as usize + 1;
        let mut buckets = alloc::vec![Vec::new(); nx * ny];
        let n = pts.len();
        for k in 0..n {
            let (a, b) = (&pts[k], &pts[(k + 1) % n]);
            let (i0, j0) = Self::cell_of(lo, cell, nx, ny, a.x.min(b.x), a.y.min(b.y));
            let (i1, j1) = Self::cell_of(lo, cell, nx, ny, a.x.max(b.x), a.y.max(b.y));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(k as u32);
                }
            }
        }
        SegmentIndex {
            origin: lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn cell_of(lo: [f64; 2], cell: f64, nx: usize, ny: usize, x: f64, y: f64) -> (usize, usize) {
        let i = floor((x - lo[0]) / cell).clamp(0.0, (nx - 1) as f64) as usize;
        let j = floor((y - lo[1]) / cell).clamp(0.0, (ny - 1) as f64) as usize;
        (i, j)
    }

    /// Index of the segment nearest to `p`, the parameter along it and the distance.
    fn nearest(&self, pts: &[BoundaryPoint], p: [f64; 2]) -> (usize, f64, f64) {
        let (ci, cj) = Self::cell_of(self.origin, self.cell, self.nx, self.ny, p[0], p[1]);
        let outside = {
            let hi = [
                self.origin[0] + self.nx as f64 * self.cell,
                self.origin[1] + self.ny as f64 * self.cell,
            ];
            let dx = (self.origin[0] - p[0]).max(p[0] - hi[0]).max(0.0);
            let dy = (self.origin[1] - p[1]).max(p[1] - hi[1]).max(0.0);
            hypot(dx, dy)
        };
        let mut best = (usize::MAX, 0.0, f64::INFINITY);
        let max_ring = self.nx.max(self.ny);
        for r in 0..=max_ring {
            let r = r as i64;
            for dj in -r..=r {
                for di in -r..=r {
                    if di.abs() != r && dj.abs() != r {
                        continue;
                    }
                    let (i, j) = (ci as i64 + di, cj as i64 + dj);
                    if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
                        continue;
                    }
                    for &k in &self.buckets[j as usize * self.nx + i as usize] {
                        let (t, d) = segment_distance(pts, k as usize, p);
                        if d < best.2 || (d == best.2 && (k as usize) < best.0) {
                            best = (k as usize, t, d);
                        }
                    }
                }
            }
            // everything in ring r + 1 is at least r cells away from the starting cell
            if best.2 <= r as f64 * self.cell - outside {
                break;
            }
        }
        best
    }
}

fn segment_distance(pts: &[BoundaryPoint], k: usize, p: [f64; 2]) -> (f64, f64) {
    let a = &pts[k];
    let b = &pts[(k + 1) % pts.len()];
    let (ex, ey) = (b.x - a.x, b.y - a.y);
    let len2 = ex * ex + ey * ey;
    let t = if len2 > 0.0 {
        (((p[0] - a.x) * ex + (p[1] - a.y) * ey) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (t, hypot(p[0] - a.x - t * ex, p[1] - a.y - t * ey))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain2D {
    pub shape: Shape,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: [f64; 2],
    pub mask: Vec<bool>,
    pub signed_distance: Vec<f64>,
    pub boundary: Vec<BoundaryPoint>,
    pub perimeter: f64,
    pub kappa_max: f64,
    index: Option<SegmentIndex>,
}

impl Domain2D {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn position(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    pub fn position_of(&self, idx: usize) -> [f64; 2] {
        self.position(idx % self.nx, idx / self.nx)
    }

    pub fn inside_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Enclosed area of the boundary polyline.
    pub fn area(&self) -> f64 {
        let n = self.boundary.len();
        0.5 * (0..n)
            .map(|k| {
                let (a, b) = (&self.boundary[k], &self.boundary[(k + 1) % n]);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
    }

    /// Point and outward normal of the boundary at arc coordinate `s` (taken modulo the
    /// perimeter).
    pub fn boundary_at(&self, s: f64) -> ([f64; 2], [f64; 2]) {
        let s = rem_euclid(s, self.perimeter);
        match &self.shape {
            Shape::Disk { radius } => {
                let a = s / radius;
                ([radius * cos(a), radius * sin(a)], [cos(a), sin(a)])
            }
            Shape::Strip { length, height } => {
                let (l, hh) = (*length, *height);
                if s < l {
                    ([s, 0.0], [0.0, -1.0])
                } else if s < l + hh {
                    ([l, s - l], [1.0, 0.0])
                } else if s < 2.0 * l + hh {
                    ([l - (s - l - hh), hh], [0.0, 1.0])
                } else {
                    ([0.0, hh - (s - 2.0 * l - hh)], [-1.0, 0.0])
                }
            }
            Shape::Dumbbell(_) => {
                let n = self.boundary.len();
                let k = self.boundary.partition_point(|b| b.s <= s).clamp(1, n) - 1;
                let (a, b) = (&self.boundary[k], &self.boundary[(k + 1) % n]);
                let end = if k + 1 == n { self.perimeter } else { b.s };
                let t = if end > a.s { (s - a.s) / (end - a.s) } else { 0.0 };
                interpolate(a, b, t)
            }
        }
    }

    /// `T(s, y) = γ(s) − y ν(γ(s))`.
    pub fn tubular_point(&self, s: f64, y: f64) -> [f64; 2] {
        let (p, n) = self.boundary_at(s);
        [p[0] - y * n[0], p[1] - y * n[1]]
    }

    /// Length ratio `|∂_s T(s, y)|` of the map from the boundary to the level set at
    /// depth `y`, by central differences.
    pub fn tube_jacobian(&self, s: f64, y: f64) -> f64 {
        let ds = 1e-5 * self.perimeter;
        let (a, b) = (self.tubular_point(s - ds, y), self.tubular_point(s + ds, y));
        hypot(b[0] - a[0], b[1] - a[1]) / (2.0 * ds)
    }

    /// Nearest-point projection onto the boundary.
    pub fn project_to_boundary(&self, p: [f64; 2]) -> Projection {
        let (point, d, normal, s) = match &self.shape {
            Shape::Disk { radius } => {
                let r = hypot(p[0], p[1]);
                let a = if r > 0.0 { atan2(p[1], p[0]) } else { 0.0 };
                let (c, sn) = (cos(a), sin(a));
                (
                    [radius * c, radius * sn],
                    radius - r,
                    [c, sn],
                    radius * rem_euclid(a, TAU),
                )
            }
            Shape::Strip { length, height } => strip_projection(*length, *height, p),
            Shape::Dumbbell(_) => {
                let index = self.index.as_ref().expect("dumbbell domains carry a segment index");
                let (k, t, dist) = index.nearest(&self.boundary, p);
                let n = self.boundary.len();
                let (a, b) = (&self.boundary[k], &self.boundary[(k + 1) % n]);
                let (point, normal) = interpolate(a, b, t);
                let end = if k + 1 == n { self.perimeter } else { b.s };
                // outward segment normal decides the side
                let (ex, ey) = (b.x - a.x, b.y - a.y);
                let side = (p[0] - point[0]) * ey - (p[1] - point[1]) * ex;
                let d = if side > 0.0 { -dist } else { dist };
                (point, d, normal, a.s + t * (end - a.s))
            }
        };
        let out_of_tube = d < 0.0 || (self.kappa_max > 0.0 && d * self.kappa_max >= 1.0);
        Projection {
            point,
            d,
            normal,
            s,
            out_of_tube,
        }
    }
}

fn interpolate(a: &BoundaryPoint, b: &BoundaryPoint, t: f64) -> ([f64; 2], [f64; 2]) {
    let p = [a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)];
    let (nx, ny) = (a.nx + t * (b.nx - a.nx), a.ny + t * (b.ny - a.ny));
    let nn = hypot(nx, ny);
    (p, [nx / nn, ny / nn])
}

fn strip_projection(l: f64, hh: f64, p: [f64; 2]) -> ([f64; 2], f64, [f64; 2], f64) {
    let [x, y] = p;
    let inside = (0.0..=l).contains(&x) && (0.0..=hh).contains(&y);
    if inside {
        // nearest side; ties go to the side met first along the boundary
        let cands = [
            (y, [x, 0.0], [0.0, -1.0], x),
            (l - x, [l, y], [1.0, 0.0], l + y),
            (hh - y, [x, hh], [0.0, 1.0], l + hh + (l - x)),
            (x, [0.0, y], [-1.0, 0.0], 2.0 * l + hh + (hh - y)),
        ];
        let best = cands.iter().fold(cands[0], |m, c| if c.0 < m.0 { *c } else { m });
        (best.1, best.0, best.2, best.3)
    } else {
        let cx = x.clamp(0.0, l);
        let cy = y.clamp(0.0, hh);
        let d = -hypot(x - cx, y - cy);
        let (normal, s) = if cy == 0.0 && cx > 0.0 && cx < l {
            ([0.0, -1.0], cx)
        } else if cx == l && cy < hh {
            ([1.0, 0.0], l + cy)
        } else if cy == hh && cx > 0.0 {
            ([0.0, 1.0], l + hh + (l - cx))
        } else {
            ([-1.0, 0.0], (2.0 * l + hh + (hh - cy)) % (2.0 * (l + hh)))
        };
        ([cx, cy], d, normal, s)
    }
}

fn check_resolution(size: f64, h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(input("cell size must be positive"));
    }
    if !(size > 4.0 * h) {
        return Err(input(alloc::format!(
            "resolution too coarse: feature size {size} needs more than 4 cells of size {h}"
        )));
    }
    Ok(())
}

fn fill_grid(
    shape: Shape,
    h: f64,
    lo: [f64; 2],
    hi: [f64; 2],
    boundary: Vec<BoundaryPoint>,
    perimeter: f64,
    kappa_max: f64,
    index: Option<SegmentIndex>,
) -> Domain2D {
    let nx = ceil((hi[0] - lo[0]) / h) as usize + 1;
    let ny = ceil((hi[1] - lo[1]) / h) as usize + 1;
    let mut dom = Domain2D {
        shape,
        nx,
        ny,
        h,
        origin: lo,
        mask: Vec::new(),
        signed_distance: Vec::new(),
        boundary,
        perimeter,
        kappa_max,
        index,
    };
    let d: Vec<f64> = (0..nx * ny)
        .map(|k| dom.project_to_boundary(dom.position_of(k)).d)
        .collect();
    dom.mask = d.iter().map(|v| *v > 0.0).collect();
    dom.signed_distance = d;
    dom
}

/// Disk of radius `r` centered at the origin, which is a grid node.
pub fn make_disk(r: f64, h: f64) -> Result<Domain2D> {
    check_resolution(r, h)?;
    let n = ceil(TAU * r / h) as usize;
    let boundary = (0..n)
        .map(|k| {
            let a = TAU * k as f64 / n as f64;
            BoundaryPoint {
                s: r * a,
                x: r * cos(a),
                y: r * sin(a),
                nx: cos(a),
                ny: sin(a),
            }
        })
        .collect();
    let m = ceil(r / h) + 2.0;
    let lo = [-m * h, -m * h];
    Ok(fill_grid(
        Shape::Disk { radius: r },
        h,
        lo,
        [m * h, m * h],
        boundary,
        TAU * r,
        1.0 / r,
        None,
    ))
}

/// The rectangle `[0, l] × [0, hh]`; its curvature is carried by the corners only and
/// `kappa_max` is reported as 0.
pub fn make_strip(l: f64, hh: f64, h: f64) -> Result<Domain2D> {
    check_resolution(l.min(hh), h)?;
    let mut boundary = Vec::new();
    let corners = [
        ([0.0, 0.0], [1.0, 0.0], l),
        ([l, 0.0], [0.0, 1.0], hh),
        ([l, hh], [-1.0, 0.0], l),
        ([0.0, hh], [0.0, -1.0], hh),
    ];
    let mut s0 = 0.0;
    for (start, dir, len) in corners {
        let n = ceil(len / h) as usize;
        for k in 0..n {
            let t = len * k as f64 / n as f64;
            boundary.push(BoundaryPoint {
                s: s0 + t,
                x: start[0] + t * dir[0],
                y: start[1] + t * dir[1],
                nx: dir[1],
                ny: -dir[0],
            });
        }
        s0 += len;
    }
    Ok(fill_grid(
        Shape::Strip { length: l, height: hh },
        h,
        [-2.0 * h, -2.0 * h],
        [l + 2.0 * h, hh + 2.0 * h],
        boundary,
        2.0 * (l + hh),
        0.0,
        None,
    ))
}

/// Counterclockwise boundary polyline of a dumbbell with vertex spacing at most `spacing`,
/// starting at the left end of the lower neck. `P` and `Q` are vertices.
pub fn dumbbell_outline(db: &Dumbbell, spacing: f64) -> Vec<BoundaryPoint> {
    let (xn, xc, r, x0) = (db.neck_end, db.bulb_center, db.spec.bulb_radius, db.contact);
    let alpha = db.tangency_angle();
    let mut pts: Vec<[f64; 4]> = Vec::new();
    let max_slope = sqrt(1.0 + db.slope(xn) * db.slope(xn));
    let neck = |from: f64, to: f64, upper: bool, pts: &mut Vec<[f64; 4]>| {
        let n = ceil(abs(to - from) * max_slope / spacing).max(1.0) as usize;
        for k in 0..n {
            let x = from + (to - from) * k as f64 / n as f64;
            let [nx, ny] = db.upper_normal(x);
            if upper {
                pts.push([x, db.half_width(x), nx, ny]);
            } else {
                pts.push([x, -db.half_width(x), nx, -ny]);
            }
        }
    };
    let bulb = |cx: f64, a0: f64, span: f64, pts: &mut Vec<[f64; 4]>| {
        let n = ceil(span * r / spacing) as usize;
        for k in 0..n {
            let a = a0 + span * k as f64 / n as f64;
            pts.push([cx + r * cos(a), r * sin(a), cos(a), sin(a)]);
        }
    };
    neck(-xn, x0, false, &mut pts);
    neck(x0, xn, false, &mut pts);
    bulb(xc, -alpha, 2.0 * alpha, &mut pts);
    neck(xn, x0, true, &mut pts);
    neck(x0, -xn, true, &mut pts);
    bulb(-xc, PI - alpha, 2.0 * alpha, &mut pts);
    let mut boundary = Vec::with_capacity(pts.len());
    let mut s = 0.0;
    for k in 0..pts.len() {
        let p = pts[k];
        boundary.push(BoundaryPoint {
            s,
            x: p[0],
            y: p[1],
            nx: p[2],
            ny: p[3],
        });
        let q = pts[(k + 1) % pts.len()];
        s += hypot(q[0] - p[0], q[1] - p[1]);
    }
    boundary
}

/// Dumbbell domain together with its contact points `P` (upper) and `Q` (lower). The
/// boundary polyline has vertices at `P` and `Q`.
pub fn make_dumbbell(spec: &DumbbellSpec, h: f64) -> Result<Domain2D> {
    let db = spec.build()?;
    check_resolution(2.0 * spec.neck_half_width, h)?;
    let spacing = 0.5 * h;
    let (xc, r) = (db.bulb_center, spec.bulb_radius);
    let boundary = dumbbell_outline(&db, spacing);
    let last = boundary[boundary.len() - 1];
    let s = last.s + hypot(boundary[0].x - last.x, boundary[0].y - last.y);
    let lo = [-xc - r - 2.0 * h, -r - 2.0 * h];
    let hi = [xc + r + 2.0 * h, r + 2.0 * h];
    let index = SegmentIndex::new(&boundary, lo, hi, 4.0 * spacing);
    let kappa = spec.neck_convexity.max(1.0 / r);
    Ok(fill_grid(
        Shape::Dumbbell(db),
        h,
        lo,
        hi,
        boundary,
        s,
        kappa,
        Some(index),
    ))
}

/// `(3β/2)(ẑ⊗ẑ − I/3)`.
pub fn g1(beta: f64) -> QTensor {
    uniaxial_zhat(1.5 * beta)
}

/// `−3β(n⊗n − I/3)` with `n = (cos a, sin a, 0)`.
pub fn g2(beta: f64, angle: f64) -> QTensor {
    uniaxial_in_plane(-3.0 * beta, angle)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundarySpec {
    G1 {
        beta: f64,
    },
    /// Director angle `winding · 2π s/|∂Ω|`; half-integer windings give continuous data.
    G2 {
        beta: f64,
        winding: Degree,
    },
    /// Constant data `left` where the boundary point has `x < split`, `right` elsewhere.
    Split {
        left: QTensor,
        right: QTensor,
        split: f64,
    },
    Uniform {
        value: QTensor,
    },
    /// Linear interpolation from `left` to `right` as `x` crosses `[center − width/2, center + width/2]`.
    Ramp {
        left: QTensor,
        right: QTensor,
        center: f64,
        width: f64,
    },
}

impl BoundarySpec {
    pub fn value(&self, point: [f64; 2], s: f64, perimeter: f64) -> QTensor {
        match *self {
            BoundarySpec::G1 { beta } => g1(beta),
            BoundarySpec::G2 { beta, winding } => g2(beta, winding.as_f64() * TAU * s / perimeter),
            BoundarySpec::Split { left, right, split } => {
                if point[0] < split {
                    left
                } else {
                    right
                }
            }
            BoundarySpec::Uniform { value } => value,
            BoundarySpec::Ramp {
                left,
                right,
                center,
                width,
            } => {
                let t = ((point[0] - center) / width + 0.5).clamp(0.0, 1.0);
                left.lerp(&right, t)
            }
        }
    }

    /// Boundary degree of the data.
    pub fn winding(&self) -> Degree {
        match *self {
            BoundarySpec::G2 { winding, .. } => winding,
            _ => Degree::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub spec: BoundarySpec,
    /// One value per boundary polyline point.
    pub values: Vec<QTensor>,
}

impl BoundaryData {
    /// Data pulled back to an arbitrary point through its boundary projection.
    pub fn at(&self, dom: &Domain2D, p: [f64; 2]) -> QTensor {
        let pr = dom.project_to_boundary(p);
        self.spec.value(pr.point, pr.s, dom.perimeter)
    }
}

pub fn make_boundary_data(dom: &Domain2D, spec: BoundarySpec) -> BoundaryData {
    let values = dom
        .boundary
        .iter()
        .map(|b| spec.value([b.x, b.y], b.s, dom.perimeter))
        .collect();
    BoundaryData { spec, values }
}
