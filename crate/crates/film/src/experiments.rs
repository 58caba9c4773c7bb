//! Scenario runner: ε sweeps in the plane and in the thin film, the asymptotic fit, the strip
//! consistency check against the partition functional and the dumbbell experiments.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nemfilm_core::domain::{g1, g2, make_boundary_data, BoundaryData, Shape};
use nemfilm_core::gamma::{
    admissible_delta, calibration_gap, contact_slide, costs_from_metric, dumbbell_candidate, f0, perturbation_test,
    AdmissibleDelta, Candidate, PartitionCosts, PerturbationConfig, PerturbationReport, SlideSweep, V,
};
use nemfilm_core::math::linear_fit;
use nemfilm_core::metric::{geodesic, phi, Endpoint, GeodesicConfig, TensorPath};
use nemfilm_core::potential::Potential;
use nemfilm_core::qtensor::QTensor;
use nemfilm_core::solver::{
    detect_defects, energy_2d, energy_3d, energy_parts_2d, initial_field, local_minimize_in_lambda_ball, minimize,
    minimize_3d, surface_bulk_gap, Defect, Energy2D, Energy3D, Field2D, Field3D, Grid2D, InitConfig, LambdaBall,
    PhiTable, Solution,
};

use crate::config::{BoundarySection, ConfigError, DomainSection, Kind, Loaded};
use crate::io::{self, num, Table};
use crate::manifest::{Manifest, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Options {
    /// Overrides `scenario.seed`.
    pub seed: Option<u64>,
    pub threads: usize,
    pub quiet: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            seed: None,
            threads: 1,
            quiet: true,
        }
    }
}

/// Calibrated potential and `φ` table shared by every run of a scenario.
pub struct Setup {
    pub loaded: Loaded,
    pub seed: u64,
    pub pot: Potential,
    pub table: PhiTable,
    pub opts: Options,
}

impl Setup {
    pub fn new(loaded: Loaded, opts: Options) -> Result<Self> {
        let seed = opts.seed.unwrap_or(loaded.config.scenario.seed);
        let pot = loaded.config.potential(seed).context("calibrating the potential")?;
        let table = PhiTable::build(&pot, loaded.config.solver.phi_table).context("tabulating φ")?;
        Ok(Setup {
            loaded,
            seed,
            pot,
            table,
            opts,
        })
    }

    fn log(&self, msg: impl AsRef<str>) {
        if !self.opts.quiet {
            eprintln!("[{}] {}", self.loaded.config.scenario.name, msg.as_ref());
        }
    }

    fn manifest(&self, verb: &str) -> Manifest {
        Manifest::new(
            verb,
            &self.loaded.config.scenario.name,
            &self.loaded.sha256,
            self.seed,
            self.opts.threads.max(1),
        )
    }

    fn center(&self) -> [f64; 2] {
        match self.loaded.config.domain {
            DomainSection::Strip { length, height } => [0.5 * length, 0.5 * height],
            _ => [0.0, 0.0],
        }
    }

    /// Grid and data at `ε`.
    fn grid(&self, eps: f64, costs: Option<[f64; 3]>) -> Result<(Grid2D, BoundaryData)> {
        let cfg = &self.loaded.config;
        let dom = cfg.domain(cfg.spacing(eps), costs)?;
        let spec = cfg.boundary_spec(&self.pot)?;
        let bd = make_boundary_data(&dom, spec);
        Ok((Grid2D::new(dom)?, bd))
    }

    fn initial(&self, grid: &Grid2D, bd: &BoundaryData, eps: f64) -> Field2D {
        let cfg = &self.loaded.config;
        let taper = match cfg.solver.taper {
            Some(t) => Some(t * eps),
            None if cfg.degree().twice() != 0 => Some(eps),
            None => None,
        };
        let init = InitConfig {
            taper,
            center: self.center(),
            noise: cfg.solver.noise,
            seed: self.seed,
        };
        initial_field(grid, bd, &self.pot, &init)
    }
}

/// Applies `f` to `0..n` on up to `threads` workers; results keep index order.
fn par_map<T: Send>(n: usize, threads: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= n {
                    break;
                }
                let v = f(k);
                slots.lock().unwrap()[k] = Some(v);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|v| v.expect("worker result"))
        .collect()
}

fn record(label: String, eps: f64, grid: &Grid2D, sol_report: &nemfilm_core::optim::Report, seconds: f64) -> RunRecord {
    RunRecord {
        label,
        eps,
        h: grid.h(),
        nodes: grid.domain.inside_count(),
        iterations: sol_report.iterations,
        status: RunRecord::status_name(sol_report.status),
        converged: sol_report.converged(),
        seconds,
    }
}

fn run_dir(out: &Path, k: usize) -> Result<std::path::PathBuf> {
    let dir = out.join(format!("eps_{k:02}"));
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

// ---------------------------------------------------------------- planar sweeps

pub struct PlanarRun {
    pub eps: f64,
    pub grid: Grid2D,
    pub solution: Solution<Field2D>,
    pub energy: Energy2D,
    pub defects: Vec<Defect>,
    pub seconds: f64,
}

pub fn solve_planar(s: &Setup, eps: f64) -> Result<PlanarRun> {
    let t = Instant::now();
    let (grid, bd) = s.grid(eps, None)?;
    let f0 = s.initial(&grid, &bd, eps);
    let cfg = s.loaded.config.solve_config(eps, s.seed);
    let solution = minimize(&grid, &f0, &s.pot, &cfg)?;
    let energy = energy_parts_2d(&grid, &solution.field, &s.pot, eps);
    let defects = detect_defects(
        &grid,
        &solution.field,
        &s.table,
        s.loaded.config.solver.defect_threshold,
    )?;
    s.log(format!(
        "eps {eps:.5}: energy {:.8}, {} iterations, {} defect(s)",
        energy.total,
        solution.report.iterations,
        defects.len()
    ));
    Ok(PlanarRun {
        eps,
        grid,
        solution,
        energy,
        defects,
        seconds: t.elapsed().as_secs_f64(),
    })
}

pub const ENERGY_HEADER: [&str; 11] = [
    "eps",
    "h",
    "nodes",
    "energy",
    "gradient_energy",
    "potential_energy",
    "iterations",
    "status",
    "converged",
    "defects",
    "degree_sum",
];

pub const THIN_HEADER: [&str; 12] = [
    "eps",
    "h",
    "layers",
    "lateral",
    "vertical",
    "bulk",
    "surface",
    "total",
    "gap",
    "iterations",
    "status",
    "converged",
];

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub eps: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub eps: Vec<f64>,
    pub gap: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSummary {
    pub manifest: Manifest,
    pub energies: Vec<EnergyRow>,
    pub decay: Option<DecayFit>,
    pub converged: bool,
}

/// Runs every `ε` of the sweep and writes the artifacts under `out`. Artifacts are written
/// even when some run does not converge; `converged` reports it.
pub fn run_scenario(loaded: Loaded, out: &Path, opts: Options) -> Result<ScenarioSummary> {
    match loaded.config.scenario.kind {
        Kind::Planar => run_planar(Setup::new(loaded, opts)?, out),
        Kind::Thin3d => run_thin(Setup::new(loaded, opts)?, out),
    }
}

fn run_planar(s: Setup, out: &Path) -> Result<ScenarioSummary> {
    let t = Instant::now();
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let eps = s.loaded.config.eps_list()?;
    let runs = par_map(eps.len(), s.opts.threads, |k| solve_planar(&s, eps[k]));
    let mut manifest = s.manifest("run");
    let mut table = Table::create(&out.join("energies.csv"), &ENERGY_HEADER)?;
    let mut energies = Vec::new();
    let mut converged = true;
    for (k, run) in runs.into_iter().enumerate() {
        let run = run?;
        let dir = run_dir(out, k)?;
        io::write_field(&dir.join("field.csv"), &run.grid, &run.solution.field, &s.pot, &s.table)?;
        io::write_trace(&dir.join("trace.csv"), &run.solution.trace)?;
        io::write_defects(&dir.join("defects.csv"), &run.defects)?;
        io::write_domain(&dir.join("domain.csv"), &run.grid.domain)?;
        io::write_boundary(&dir.join("boundary.csv"), &run.grid.domain)?;
        let rep = &run.solution.report;
        let degree_sum: f64 = run.defects.iter().filter_map(|d| d.degree).map(|d| d.as_f64()).sum();
        table.row([
            num(run.eps),
            num(run.grid.h()),
            run.grid.domain.inside_count().to_string(),
            num(run.energy.total),
            num(run.energy.gradient),
            num(run.energy.potential),
            rep.iterations.to_string(),
            RunRecord::status_name(rep.status),
            u8::from(rep.converged()).to_string(),
            run.defects.len().to_string(),
            num(degree_sum),
        ])?;
        converged &= rep.converged();
        energies.push(EnergyRow {
            eps: run.eps,
            energy: run.energy.total,
        });
        manifest
            .runs
            .push(record(format!("eps_{k:02}"), run.eps, &run.grid, rep, run.seconds));
    }
    table.finish()?;
    manifest.flags.insert("converged".into(), converged);
    manifest.seconds = t.elapsed().as_secs_f64();
    manifest.write(out)?;
    Ok(ScenarioSummary {
        manifest,
        energies,
        decay: None,
        converged,
    })
}

struct ThinRun {
    eps: f64,
    grid: Grid2D,
    parts: Energy3D,
    gap: f64,
    solution: Solution<Field3D>,
    seconds: f64,
}

fn solve_thin(s: &Setup, eps: f64, layers: usize) -> Result<ThinRun> {
    let t = Instant::now();
    let (grid, bd) = s.grid(eps, None)?;
    let f2 = s.initial(&grid, &bd, eps);
    let f0 = Field3D::extrude(&f2, layers)?;
    let cfg = s.loaded.config.solve_config(eps, s.seed);
    let solution = minimize_3d(&grid, &f0, &s.pot, &cfg)?;
    let parts = energy_3d(&grid, &solution.field, &s.pot, eps);
    let gap = surface_bulk_gap(&grid, &solution.field, &s.pot, eps);
    s.log(format!(
        "eps {eps:.5}: total {:.8}, gap {gap:e}, {} iterations",
        parts.total, solution.report.iterations
    ));
    Ok(ThinRun {
        eps,
        grid,
        parts,
        gap,
        solution,
        seconds: t.elapsed().as_secs_f64(),
    })
}

fn run_thin(s: Setup, out: &Path) -> Result<ScenarioSummary> {
    let t = Instant::now();
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let eps = s.loaded.config.eps_list()?;
    let layers = s
        .loaded
        .config
        .scenario
        .layers
        .ok_or_else(|| ConfigError("missing required key `scenario.layers`".into()))?;
    let runs = par_map(eps.len(), s.opts.threads, |k| solve_thin(&s, eps[k], layers));
    let mut manifest = s.manifest("run");
    let mut table = Table::create(&out.join("energies_3d.csv"), &THIN_HEADER)?;
    let mut converged = true;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut energies = Vec::new();
    for (k, run) in runs.into_iter().enumerate() {
        let run = run?;
        let dir = run_dir(out, k)?;
        io::write_trace(&dir.join("trace.csv"), &run.solution.trace)?;
        let rep = &run.solution.report;
        let p = &run.parts;
        table.row([
            num(run.eps),
            num(run.grid.h()),
            layers.to_string(),
            num(p.lateral),
            num(p.vertical),
            num(p.bulk),
            num(p.surface),
            num(p.total),
            num(run.gap),
            rep.iterations.to_string(),
            RunRecord::status_name(rep.status),
            u8::from(rep.converged()).to_string(),
        ])?;
        converged &= rep.converged();
        xs.push(run.eps);
        ys.push(run.gap);
        energies.push(EnergyRow {
            eps: run.eps,
            energy: p.total,
        });
        manifest
            .runs
            .push(record(format!("eps_{k:02}"), run.eps, &run.grid, rep, run.seconds));
    }
    table.finish()?;
    let decay = decay_fit(&xs, &ys)?;
    manifest.results.insert("gap_slope".into(), decay.slope);
    manifest.results.insert("gap_slope_r2".into(), decay.r2);
    manifest.flags.insert("converged".into(), converged);
    manifest.seconds = t.elapsed().as_secs_f64();
    manifest.write(out)?;
    Ok(ScenarioSummary {
        manifest,
        energies,
        decay: Some(decay),
        converged,
    })
}

/// Log-log regression of the surface/bulk gap against `ε`.
pub fn decay_fit(eps: &[f64], gap: &[f64]) -> Result<DecayFit> {
    if eps.len() < 2 || gap.iter().any(|g| !(*g > 0.0)) {
        bail!("decay fit needs at least two runs with positive gaps");
    }
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = gap.iter().map(|g| g.ln()).collect();
    let (intercept, slope, r2) = linear_fit(&lx, &ly);
    Ok(DecayFit {
        eps: eps.to_vec(),
        gap: gap.to_vec(),
        slope,
        intercept,
        r2,
    })
}

// ---------------------------------------------------------------- asymptotic fit

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Targets {
    /// `2 φ(g) |∂Ω|` with the cheapest well.
    pub a: f64,
    /// `π k s*²` with `k` twice the director winding.
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Euclidean norm of the residual vector.
    pub residual: f64,
    pub points: usize,
    pub targets: Targets,
    pub rel_a: f64,
    /// `|B − B*|/B*`, or `|B|/(π s*²)` when the target vanishes.
    pub rel_b: f64,
}

/// The smallest ratio `ε_max/ε_min` accepted by [`fit_asymptotics`].
pub const MIN_SPAN: f64 = 8.0;

/// Least squares for `E ≈ A + B ε ln(1/ε) + C ε` through Householder QR. Rows are sorted
/// by `ε` first, so the result does not depend on their order.
pub fn fit_asymptotics(rows: &[EnergyRow], targets: Targets, b_scale: f64) -> Result<AsymptoticFit> {
    if rows.len() < 4 {
        bail!("asymptotic fit needs at least 4 points, got {}", rows.len());
    }
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| b.eps.total_cmp(&a.eps).then(a.energy.total_cmp(&b.energy)));
    let (hi, lo) = (rows[0].eps, rows[rows.len() - 1].eps);
    if !(lo > 0.0) || !(hi / lo >= MIN_SPAN) {
        bail!("asymptotic fit needs ε spanning a factor of at least {MIN_SPAN}, got [{lo}, {hi}]");
    }
    let design: Vec<[f64; 3]> = rows.iter().map(|r| [1.0, r.eps * (1.0 / r.eps).ln(), r.eps]).collect();
    let rhs: Vec<f64> = rows.iter().map(|r| r.energy).collect();
    let (coef, residual) = least_squares3(&design, &rhs)?;
    let [a, b, c] = coef;
    let rel_a = (a - targets.a).abs() / targets.a.abs();
    let rel_b = if targets.b != 0.0 {
        (b - targets.b).abs() / targets.b.abs()
    } else {
        b.abs() / b_scale
    };
    Ok(AsymptoticFit {
        a,
        b,
        c,
        residual,
        points: rows.len(),
        targets,
        rel_a,
        rel_b,
    })
}

fn least_squares3(x: &[[f64; 3]], y: &[f64]) -> Result<([f64; 3], f64)> {
    let m = x.len();
    let mut a: Vec<[f64; 3]> = x.to_vec();
    let mut b = y.to_vec();
    let norms: Vec<f64> = (0..3)
        .map(|j| a.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt())
        .collect();
    for j in 0..3 {
        let alpha = (j..m).map(|i| a[i][j] * a[i][j]).sum::<f64>().sqrt();
        if !(alpha > 1e-10 * norms[j]) {
            bail!("asymptotic fit: design matrix is rank deficient (column {j})");
        }
        let alpha = if a[j][j] > 0.0 { -alpha } else { alpha };
        let mut v: Vec<f64> = (j..m).map(|i| a[i][j]).collect();
        v[0] -= alpha;
        let vn: f64 = v.iter().map(|t| t * t).sum();
        for col in j..3 {
            let d: f64 = (j..m).map(|i| v[i - j] * a[i][col]).sum::<f64>() * 2.0 / vn;
            for i in j..m {
                a[i][col] -= d * v[i - j];
            }
        }
        let d: f64 = (j..m).map(|i| v[i - j] * b[i]).sum::<f64>() * 2.0 / vn;
        for i in j..m {
            b[i] -= d * v[i - j];
        }
    }
    let mut c = [0.0; 3];
    for j in (0..3).rev() {
        let s: f64 = (j + 1..3).map(|k| a[j][k] * c[k]).sum();
        c[j] = (b[j] - s) / a[j][j];
    }
    let residual = b[3..].iter().map(|t| t * t).sum::<f64>().sqrt();
    Ok((c, residual))
}

/// Boundary data at the first polyline point, which fixes `φ_i(g)` for rotation-covariant data.
fn boundary_sample(s: &Setup) -> Result<QTensor> {
    let cfg = &s.loaded.config;
    Ok(match cfg.boundary {
        BoundarySection::G1 { beta } => g1(beta),
        BoundarySection::G2 { beta, .. } => g2(beta, 0.0),
        BoundarySection::Well { well } | BoundarySection::Ramp { left_well: well, .. } => {
            s.pot
                .wells
                .get(well)
                .ok_or_else(|| ConfigError(format!("well {well} does not exist")))?
                .representative
        }
    })
}

pub fn targets(s: &Setup) -> Result<Targets> {
    let cfg = &s.loaded.config;
    let g = boundary_sample(s)?;
    let gc = GeodesicConfig::default();
    let mut best = f64::INFINITY;
    for i in 0..s.pot.wells.len() {
        best = best.min(phi(i, &g, &s.pot, &gc)?.length);
    }
    let perimeter = match cfg.perimeter() {
        Some(p) => p,
        None => cfg.domain(cfg.spacing(cfg.eps_list()?[0]), None)?.perimeter,
    };
    let k = (cfg.degree().twice()).abs() as f64;
    let s_star = s.pot.s_star.value;
    Ok(Targets {
        a: 2.0 * best * perimeter,
        b: std::f64::consts::PI * k * s_star * s_star,
    })
}

/// Fits the energies of a finished run and writes `fit.csv`.
pub fn fit_run(s: &Setup, rows: &[EnergyRow], out: &Path) -> Result<AsymptoticFit> {
    let t = targets(s)?;
    let s_star = s.pot.s_star.value;
    let fit = fit_asymptotics(rows, t, std::f64::consts::PI * s_star * s_star)?;
    let mut table = Table::create(
        &out.join("fit.csv"),
        &["parameter", "value", "target", "relative_deviation"],
    )?;
    table.row(["A".to_string(), num(fit.a), num(t.a), num(fit.rel_a)])?;
    table.row(["B".to_string(), num(fit.b), num(t.b), num(fit.rel_b)])?;
    table.row(["C".to_string(), num(fit.c), String::new(), String::new()])?;
    table.finish()?;
    Ok(fit)
}

pub fn read_energies(path: &Path) -> Result<Vec<EnergyRow>> {
    let cols = io::read_columns(path, &["eps", "energy"])?;
    if cols[0].is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(cols[0]
        .iter()
        .zip(&cols[1])
        .map(|(&eps, &energy)| EnergyRow { eps, energy })
        .collect())
}

// ---------------------------------------------------------------- strip consistency

#[derive(Debug, Clone, PartialEq)]
pub struct GammaRow {
    pub eps: f64,
    pub h: f64,
    pub energy: f64,
    pub deviation: f64,
    /// Where the cheaper-well label switches along the midline, if it does.
    pub interface_x: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaReport {
    pub f0: f64,
    pub interface_term: f64,
    pub boundary_term: f64,
    pub optimal_x: f64,
    pub rows: Vec<GammaRow>,
    pub deviation_ok: bool,
    pub monotone: bool,
    pub position_ok: bool,
}

struct Ramp {
    xs: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl Ramp {
    /// `∫ φ_left` up to `x` plus `∫ φ_right` beyond, for piecewise-linear samples.
    fn boundary_integral(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for k in 0..self.xs.len() - 1 {
            let (a, b) = (self.xs[k], self.xs[k + 1]);
            let seg = |f: &[f64], lo: f64, hi: f64| {
                if hi <= lo {
                    return 0.0;
                }
                let at = |t: f64| f[k] + (f[k + 1] - f[k]) * (t - a) / (b - a);
                0.5 * (hi - lo) * (at(lo) + at(hi))
            };
            s += seg(&self.left, a, x.clamp(a, b)) + seg(&self.right, x.clamp(a, b), b);
        }
        s
    }
}

/// Partition energy of the best vertical interface on a strip with ramp data: interface
/// cost `2 d(P_l, P_r) H` plus `2 φ_label(g)` integrated along top and bottom.
fn strip_f0(s: &Setup, samples: usize) -> Result<(f64, f64, f64, f64)> {
    let cfg = &s.loaded.config;
    let DomainSection::Strip { length, height } = cfg.domain else {
        return Err(ConfigError("the consistency check needs `domain.shape = \"strip\"`".into()).into());
    };
    let BoundarySection::Ramp {
        left_well, right_well, ..
    } = cfg.boundary
    else {
        return Err(ConfigError("the consistency check needs `boundary.kind = \"ramp\"`".into()).into());
    };
    let spec = cfg.boundary_spec(&s.pot)?;
    let gc = GeodesicConfig::default();
    let d = geodesic(&Endpoint::Well(left_well), &Endpoint::Well(right_well), &s.pot, &gc)?.length;
    let xs: Vec<f64> = (0..=samples).map(|k| length * k as f64 / samples as f64).collect();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &x in &xs {
        let g = spec.value([x, 0.0], 0.0, 1.0);
        left.push(phi(left_well, &g, &s.pot, &gc)?.length);
        right.push(phi(right_well, &g, &s.pot, &gc)?.length);
    }
    let ramp = Ramp { xs, left, right };
    // the boundary integral is convex in x with slope φ_left − φ_right; bisect on it
    let diff = |k: usize| ramp.left[k] - ramp.right[k];
    let mut x_opt = length;
    for k in 0..samples {
        let (a, b) = (diff(k), diff(k + 1));
        if a <= 0.0 && b > 0.0 {
            x_opt = ramp.xs[k] + (ramp.xs[k + 1] - ramp.xs[k]) * (-a) / (b - a);
            break;
        }
        if k == 0 && a > 0.0 {
            x_opt = 0.0;
            break;
        }
    }
    // two edges, each carrying 2 φ
    let boundary = 4.0 * ramp.boundary_integral(x_opt);
    let interface = 2.0 * d * height;
    Ok((interface + boundary, interface, boundary, x_opt))
}

/// Label switch along the row nearest the strip midline, from `φ_left − φ_right`.
fn midline_switch(
    grid: &Grid2D,
    f: &Field2D,
    table: &PhiTable,
    wells: (usize, usize),
    y: f64,
    skip: f64,
) -> Result<Option<f64>> {
    let dom = &grid.domain;
    let phis = table.phi_field(grid, f)?;
    let j = ((y - dom.origin[1]) / dom.h).round() as usize;
    let diff = |k: usize| phis[wells.0][k] - phis[wells.1][k];
    for i in 0..dom.nx - 1 {
        let (k, k2) = (dom.idx(i, j), dom.idx(i + 1, j));
        if !(dom.mask[k] && dom.mask[k2]) || dom.signed_distance[k] < skip || dom.signed_distance[k2] < skip {
            continue;
        }
        let (a, b) = (diff(k), diff(k2));
        if (a <= 0.0) != (b <= 0.0) {
            let x = dom.position_of(k)[0];
            return Ok(Some(x + dom.h * a / (a - b)));
        }
    }
    Ok(None)
}

pub const GAMMA_HEADER: [&str; 9] = [
    "eps",
    "h",
    "energy",
    "f0",
    "deviation",
    "interface_x",
    "optimal_x",
    "offset_cells",
    "converged",
];

pub fn gamma_consistency(loaded: Loaded, out: &Path, opts: Options) -> Result<GammaReport> {
    let t = Instant::now();
    let s = Setup::new(loaded, opts)?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let (f0v, interface_term, boundary_term, optimal_x) = strip_f0(&s, 64)?;
    s.log(format!(
        "F0 = {f0v:.8} (interface {interface_term:.8}, boundary {boundary_term:.8}) at x = {optimal_x:.6}"
    ));
    let wells = match s.loaded.config.boundary {
        BoundarySection::Ramp {
            left_well, right_well, ..
        } => (left_well, right_well),
        _ => unreachable!("checked by strip_f0"),
    };
    let y_mid = s.center()[1];
    let eps = s.loaded.config.eps_list()?;
    let runs = par_map(eps.len(), s.opts.threads, |k| solve_planar(&s, eps[k]));
    let mut manifest = s.manifest("gamma-check");
    let mut table = Table::create(&out.join("gamma_consistency.csv"), &GAMMA_HEADER)?;
    let mut rows = Vec::new();
    for (k, run) in runs.into_iter().enumerate() {
        let run = run?;
        let dir = run_dir(out, k)?;
        io::write_field(&dir.join("field.csv"), &run.grid, &run.solution.field, &s.pot, &s.table)?;
        io::write_trace(&dir.join("trace.csv"), &run.solution.trace)?;
        let e = energy_2d(&run.grid, &run.solution.field, &s.pot, run.eps);
        let x = midline_switch(&run.grid, &run.solution.field, &s.table, wells, y_mid, 0.0)?;
        let row = GammaRow {
            eps: run.eps,
            h: run.grid.h(),
            energy: e,
            deviation: (e - f0v) / f0v,
            interface_x: x,
            converged: run.solution.report.converged(),
        };
        table.row([
            num(row.eps),
            num(row.h),
            num(row.energy),
            num(f0v),
            num(row.deviation),
            x.map(num).unwrap_or_default(),
            num(optimal_x),
            x.map(|x| num((x - optimal_x).abs() / row.h)).unwrap_or_default(),
            u8::from(row.converged).to_string(),
        ])?;
        manifest.runs.push(record(
            format!("eps_{k:02}"),
            run.eps,
            &run.grid,
            &run.solution.report,
            run.seconds,
        ));
        rows.push(row);
    }
    table.finish()?;
    let last = rows.last().expect("nonempty sweep");
    let deviation_ok = last.deviation.abs() < 0.1;
    let monotone = rows.windows(2).all(|w| w[1].deviation.abs() < w[0].deviation.abs());
    let position_ok = last.interface_x.is_some_and(|x| (x - optimal_x).abs() <= 2.0 * last.h);
    manifest.results.insert("f0".into(), f0v);
    manifest.results.insert("optimal_x".into(), optimal_x);
    manifest.results.insert("final_deviation".into(), last.deviation);
    manifest.flags.insert("deviation_ok".into(), deviation_ok);
    manifest.flags.insert("monotone".into(), monotone);
    manifest.flags.insert("position_ok".into(), position_ok);
    manifest
        .flags
        .insert("converged".into(), rows.iter().all(|r| r.converged));
    manifest.seconds = t.elapsed().as_secs_f64();
    manifest.write(out)?;
    Ok(GammaReport {
        f0: f0v,
        interface_term,
        boundary_term,
        optimal_x,
        rows,
        deviation_ok,
        monotone,
        position_ok,
    })
}

// ---------------------------------------------------------------- dumbbell

/// Constant boundary data, as required by the partition costs.
fn constant_data(s: &Setup) -> Result<QTensor> {
    match s.loaded.config.boundary {
        BoundarySection::G2 { degree, .. } if degree != 0.0 => {
            Err(ConfigError("partition costs need constant data: set `boundary.degree = 0`".into()).into())
        }
        BoundarySection::Ramp { .. } => {
            Err(ConfigError("partition costs need constant data, not a ramp".into()).into())
        }
        _ => boundary_sample(s),
    }
}

pub struct DumbbellSetup {
    pub setup: Setup,
    pub costs: PartitionCosts,
    pub strict_triangle: bool,
    pub candidate: Candidate,
}

pub fn dumbbell_setup(loaded: Loaded, opts: Options) -> Result<DumbbellSetup> {
    let s = Setup::new(loaded, opts)?;
    if !matches!(s.loaded.config.domain, DomainSection::Dumbbell { .. }) {
        return Err(ConfigError("dumbbell runs need `domain.shape = \"dumbbell\"`".into()).into());
    }
    let g = constant_data(&s)?;
    let report = costs_from_metric(&s.pot, &g, &GeodesicConfig::default())?;
    let c = &report.costs;
    let spec = s
        .loaded
        .config
        .dumbbell_spec([c.c1(), c.c2(), c.c3()])
        .expect("dumbbell domain");
    let candidate = dumbbell_candidate(&spec, s.loaded.config.gamma.outline_spacing)?;
    s.log(format!(
        "costs c1 {:.6}, c2 {:.6}, c3 {:.6}; contact x0 = {:.6}",
        c.c1(),
        c.c2(),
        c.c3(),
        candidate.dumbbell.contact
    ));
    Ok(DumbbellSetup {
        setup: s,
        costs: report.costs,
        strict_triangle: report.strict_triangle,
        candidate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalityReport {
    pub candidate_f0: f64,
    pub admissible: AdmissibleDelta,
    pub perturbation: PerturbationReport,
    pub slide: SlideSweep,
    pub candidate_gap: f64,
    /// `(arc shift, gap)` for straight interfaces with both contacts shifted.
    pub tilted_gaps: Vec<(f64, f64)>,
}

pub const SLIDE_HEADER: [&str; 2] = ["arc", "delta_f0"];
pub const PARTITION_HEADER: [&str; 6] = ["region", "label", "ring", "vertex", "x", "y"];

/// Perturbation test, contact slide and calibration gaps for the straight candidate.
pub fn minimality_check(d: &DumbbellSetup, out: &Path) -> Result<MinimalityReport> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let s = &d.setup;
    let g = &s.loaded.config.gamma;
    let c = &d.candidate;
    let candidate_f0 = f0(&c.partition, &d.costs)?.total;
    let admissible = admissible_delta(c, &d.costs);
    let pcfg = PerturbationConfig {
        delta_l1: g.delta_l1.unwrap_or(admissible.delta),
        trials: g.trials,
        seed: s.seed,
    };
    let perturbation = perturbation_test(c, &d.costs, &pcfg)?;
    let slide = contact_slide(c, &d.costs, g.slide_max, g.slide_points)?;
    let candidate_gap = calibration_gap(&c.partition, &d.costs, V)?;
    let (sp, sq) = c.contact_arcs();
    let mut tilted_gaps = Vec::new();
    for shift in [-0.02, -0.01, 0.01, 0.02] {
        let part = c.split(sp + shift, sq + shift, &[])?;
        tilted_gaps.push((shift, calibration_gap(&part, &d.costs, V)?));
    }
    s.log(format!(
        "perturbations: {} trials, min ΔF0 {:e} ({}), pass {}",
        perturbation.trials.len(),
        perturbation.min_delta,
        perturbation.trials[perturbation.argmin].kind.name(),
        perturbation.pass
    ));

    let mut t = Table::create(&out.join("perturbations.csv"), &io::GAMMA_REPORT_HEADER)?;
    for tr in &perturbation.trials {
        t.row([
            tr.id.to_string(),
            tr.kind.name().to_string(),
            num(tr.l1),
            num(tr.f0),
            num(tr.delta_f0),
        ])?;
    }
    t.finish()?;
    let mut t = Table::create(&out.join("slide.csv"), &SLIDE_HEADER)?;
    for (a, v) in slide.arc.iter().zip(&slide.delta_f0) {
        t.row([num(*a), num(*v)])?;
    }
    t.finish()?;
    let mut t = Table::create(&out.join("partition.csv"), &PARTITION_HEADER)?;
    for (r, region) in c.partition.regions.iter().enumerate() {
        let rings = std::iter::once(&region.outer).chain(region.holes.iter());
        for (ring_id, ring) in rings.enumerate() {
            for (v, p) in ring.iter().enumerate() {
                t.row([
                    r.to_string(),
                    region.label.to_string(),
                    ring_id.to_string(),
                    v.to_string(),
                    num(p[0]),
                    num(p[1]),
                ])?;
            }
        }
    }
    t.finish()?;
    Ok(MinimalityReport {
        candidate_f0,
        admissible,
        perturbation,
        slide,
        candidate_gap,
        tilted_gaps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationRow {
    pub eps: f64,
    pub h: f64,
    pub lambda: f64,
    pub delta: f64,
    pub interior: bool,
    pub energy: f64,
    pub deviation: f64,
    pub interface_x: Option<f64>,
    pub in_tube: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationReport {
    pub candidate_f0: f64,
    pub contact_x: f64,
    /// Half-width `10√δ` of the neck tube, with `δ` the admissible perturbation radius.
    pub tube: f64,
    pub rows: Vec<ContinuationRow>,
    pub decreasing: bool,
    pub all_interior: bool,
    pub pass: bool,
}

pub const CONTINUATION_HEADER: [&str; 12] = [
    "eps",
    "h",
    "lambda",
    "delta",
    "interior",
    "energy",
    "f0",
    "deviation",
    "interface_x",
    "contact_x",
    "in_tube",
    "converged",
];

/// The candidate partition lifted to well values, blended into the boundary data over
/// `layer_width·ε` with a `tanh` profile in the distance to `∂Ω`.
pub fn lifted_partition(d: &DumbbellSetup, grid: &Grid2D, bd: &BoundaryData, eps: f64) -> Field2D {
    let pot = &d.setup.pot;
    let (p1, p2) = (
        pot.wells.components[0].representative,
        pot.wells.components[1].representative,
    );
    let x0 = d.candidate.dumbbell.contact;
    let width = d.setup.loaded.config.gamma.layer_width * eps;
    let dom = &grid.domain;
    grid.field_from(bd, |x| {
        let well = if x[0] < x0 { p1 } else { p2 };
        let pr = dom.project_to_boundary(x);
        let g = bd.spec.value(pr.point, pr.s, dom.perimeter);
        g.lerp(&well, (pr.d / width).tanh())
    })
}

pub fn local_min_continuation(d: &DumbbellSetup, out: &Path) -> Result<ContinuationReport> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let s = &d.setup;
    let cfg = &s.loaded.config;
    let c = &d.candidate;
    let costs = [d.costs.c1(), d.costs.c2(), d.costs.c3()];
    let candidate_f0 = f0(&c.partition, &d.costs)?.total;
    let contact_x = c.dumbbell.contact;
    let tube = 10.0 * admissible_delta(c, &d.costs).delta.sqrt();
    let phi_scale = d.costs.interface.iter().flatten().fold(0.0f64, |a, b| a.max(*b));
    let eps = cfg.eps_list()?;
    let runs = par_map(eps.len(), s.opts.threads, |k| -> Result<_> {
        let t = Instant::now();
        let eps = eps[k];
        let (grid, bd) = s.grid(eps, Some(costs))?;
        if !matches!(grid.domain.shape, Shape::Dumbbell(_)) {
            bail!("expected a dumbbell grid");
        }
        let center = lifted_partition(d, &grid, &bd, eps);
        let delta = cfg.gamma.ball_delta.unwrap_or(0.1 * grid.domain.area() * phi_scale);
        let ball = LambdaBall {
            center,
            delta,
            mu: cfg.gamma.ball_mu,
            margin: cfg.gamma.ball_margin * delta,
        };
        let out = local_minimize_in_lambda_ball(&grid, &ball, &s.pot, &s.table, &cfg.solve_config(eps, s.seed))?;
        let energy = energy_2d(&grid, &out.solution.field, &s.pot, eps);
        let x = midline_switch(
            &grid,
            &out.solution.field,
            &s.table,
            (0, 1),
            0.0,
            cfg.gamma.layer_width * eps,
        )?;
        s.log(format!(
            "eps {eps:.5}: Λ {:.6} (δ {delta:.6}), interior {}, interface at {x:?}",
            out.lambda, out.interior
        ));
        Ok((grid, out, delta, energy, x, t.elapsed().as_secs_f64()))
    });
    let mut manifest = s.manifest("dumbbell");
    let mut table = Table::create(&out.join("continuation.csv"), &CONTINUATION_HEADER)?;
    let mut rows = Vec::new();
    for (k, run) in runs.into_iter().enumerate() {
        let (grid, outcome, delta, energy, x, seconds) = run?;
        let dir = run_dir(out, k)?;
        io::write_field(&dir.join("field.csv"), &grid, &outcome.solution.field, &s.pot, &s.table)?;
        io::write_trace(&dir.join("trace.csv"), &outcome.solution.trace)?;
        let row = ContinuationRow {
            eps: eps[k],
            h: grid.h(),
            lambda: outcome.lambda,
            delta,
            interior: outcome.interior,
            energy,
            deviation: (energy - candidate_f0) / candidate_f0,
            interface_x: x,
            in_tube: x.is_some_and(|x| (x - contact_x).abs() <= tube),
            converged: outcome.solution.report.converged(),
        };
        table.row([
            num(row.eps),
            num(row.h),
            num(row.lambda),
            num(row.delta),
            u8::from(row.interior).to_string(),
            num(row.energy),
            num(candidate_f0),
            num(row.deviation),
            x.map(num).unwrap_or_default(),
            num(contact_x),
            u8::from(row.in_tube).to_string(),
            u8::from(row.converged).to_string(),
        ])?;
        manifest.runs.push(record(
            format!("eps_{k:02}"),
            row.eps,
            &grid,
            &outcome.solution.report,
            seconds,
        ));
        rows.push(row);
    }
    table.finish()?;
    let decreasing = rows.windows(2).all(|w| w[1].lambda < w[0].lambda);
    let all_interior = rows.iter().all(|r| r.interior);
    manifest.results.insert("candidate_f0".into(), candidate_f0);
    manifest.results.insert("contact_x".into(), contact_x);
    manifest.results.insert("tube".into(), tube);
    manifest.flags.insert("decreasing".into(), decreasing);
    manifest.flags.insert("all_interior".into(), all_interior);
    manifest
        .flags
        .insert("converged".into(), rows.iter().all(|r| r.converged));
    manifest.write(out)?;
    Ok(ContinuationReport {
        candidate_f0,
        contact_x,
        tube,
        rows,
        decreasing,
        all_interior,
        pass: decreasing && all_interior,
    })
}

// ---------------------------------------------------------------- metric artifacts

pub const GEODESIC_HEADER: [&str; 7] = ["node_index", "q1", "q2", "q3", "q4", "q5", "w_value"];

fn write_path(path: &Path, p: &TensorPath, pot: &Potential) -> Result<()> {
    let mut t = Table::create(path, &GEODESIC_HEADER)?;
    for (k, q) in p.nodes.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(q.0.iter().map(|v| num(*v)));
        row.push(num(pot.w(q)));
        t.row(row)?;
    }
    t.finish()
}

/// Geodesics between every pair of wells and from the boundary data to each well.
pub fn geodesics(loaded: Loaded, out: &Path, opts: Options) -> Result<Manifest> {
    let t = Instant::now();
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let s = Setup::new(loaded, opts)?;
    let gc = GeodesicConfig::default();
    let mut manifest = s.manifest("geodesic");
    let n = s.pot.wells.len();
    for i in 0..n {
        for j in i + 1..n {
            let geo = geodesic(&Endpoint::Well(i), &Endpoint::Well(j), &s.pot, &gc)?;
            write_path(&out.join(format!("geodesic_well{i}_well{j}.csv")), &geo.path, &s.pot)?;
            manifest.results.insert(format!("d_well{i}_well{j}"), geo.length);
            manifest
                .flags
                .insert(format!("converged_well{i}_well{j}"), geo.converged);
        }
    }
    let g = boundary_sample(&s)?;
    for i in 0..n {
        let geo = phi(i, &g, &s.pot, &gc)?;
        write_path(&out.join(format!("geodesic_g_well{i}.csv")), &geo.path, &s.pot)?;
        manifest.results.insert(format!("phi_well{i}_g"), geo.length);
        manifest.flags.insert(format!("converged_g_well{i}"), geo.converged);
    }
    manifest.seconds = t.elapsed().as_secs_f64();
    manifest.write(out)?;
    Ok(manifest)
}

pub const WELLS_HEADER: [&str; 9] = ["index", "kind", "q1", "q2", "q3", "q4", "q5", "w", "samples"];

pub fn wells(loaded: Loaded, out: &Path, opts: Options) -> Result<Manifest> {
    let t = Instant::now();
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let seed = opts.seed.unwrap_or(loaded.config.scenario.seed);
    let pot = loaded.config.potential(seed)?;
    let mut table = Table::create(&out.join("wells.csv"), &WELLS_HEADER)?;
    for (i, w) in pot.wells.components.iter().enumerate() {
        let mut row = vec![i.to_string(), format!("{:?}", w.kind).to_lowercase()];
        row.extend(w.representative.0.iter().map(|v| num(*v)));
        row.push(num(pot.w(&w.representative)));
        row.push(w.samples.len().to_string());
        table.row(row)?;
    }
    table.finish()?;
    let mut manifest = Manifest::new(
        "wells",
        &loaded.config.scenario.name,
        &loaded.sha256,
        seed,
        opts.threads.max(1),
    );
    manifest.results.insert("s_star".into(), pot.s_star.value);
    manifest.results.insert("w_min".into(), pot.w_min);
    manifest.results.insert("wells".into(), pot.wells.len() as f64);
    manifest.seconds = t.elapsed().as_secs_f64();
    manifest.write(out)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(eps: &[f64], f: impl Fn(f64) -> f64) -> Vec<EnergyRow> {
        eps.iter().map(|&e| EnergyRow { eps: e, energy: f(e) }).collect()
    }

    fn sweep() -> Vec<f64> {
        (0..6).map(|k| 0.2 * (0.125f64).powf(k as f64 / 5.0)).collect()
    }

    #[test]
    fn exact_model_is_recovered() {
        let pi = std::f64::consts::PI;
        let r = rows(&sweep(), |e| 1.0 + pi * e * (1.0 / e).ln() + 0.3 * e);
        let fit = fit_asymptotics(&r, Targets { a: 1.0, b: pi }, pi).unwrap();
        assert!(
            (fit.a - 1.0).abs() < 1e-8 && (fit.b - pi).abs() < 1e-8 && (fit.c - 0.3).abs() < 1e-8,
            "{fit:?}"
        );
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn row_order_does_not_matter() {
        let r = rows(&sweep(), |e| {
            0.4 + 2.0 * e * (1.0 / e).ln() - e + 0.01 * (37.0 * e).sin()
        });
        let mut rev = r.clone();
        rev.reverse();
        rev.swap(1, 4);
        let t = Targets { a: 0.4, b: 2.0 };
        assert_eq!(
            fit_asymptotics(&r, t, 1.0).unwrap(),
            fit_asymptotics(&rev, t, 1.0).unwrap()
        );
    }

    #[test]
    fn degenerate_tables_are_rejected() {
        let t = Targets { a: 1.0, b: 1.0 };
        let same = rows(&[0.1, 0.1, 0.1, 0.1, 0.1], |_| 1.0);
        assert!(fit_asymptotics(&same, t, 1.0).is_err());
        assert!(fit_asymptotics(&rows(&[0.2, 0.1, 0.05], |e| e), t, 1.0).is_err());
        assert!(fit_asymptotics(&rows(&[0.2, 0.15, 0.1, 0.05], |e| e), t, 1.0).is_err());
        // two distinct ε values cannot determine three coefficients
        let two = rows(&[0.2, 0.2, 0.02, 0.02], |e| e);
        let err = fit_asymptotics(&two, t, 1.0).unwrap_err().to_string();
        assert!(err.contains("rank deficient"), "{err}");
    }

    #[test]
    fn par_map_keeps_order() {
        let v = par_map(17, 3, |k| k * k);
        assert_eq!(v, (0..17).map(|k| k * k).collect::<Vec<_>>());
    }
}
