//! Acceptance suite. Each test checks one criterion at its stated tolerance and prints a
//! single `PASS`/`FAIL` line with the measured numbers (run with `--nocapture` to see them).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nemfilm::config::{self, Loaded};
use nemfilm::experiments::{self, Options, Setup};
use nemfilm_core::domain::{make_boundary_data, make_disk, BoundarySpec};
use nemfilm_core::math::linear_fit;
use nemfilm_core::metric::{
    layer_energy_1d, path_energy, phi, profile_ode, slice_distance, tail_fit, GeodesicConfig, LayerConfig, TensorPath,
};
use nemfilm_core::potential::appendix::{
    appendix_residual, stationary_point, zhat_eigenvector_test, BetaCase, ZhatReport,
};
use nemfilm_core::potential::{calibrate, s_star, Potential, PotentialParams, WellKind};
use nemfilm_core::qtensor::{rotate_z, uniaxial_in_plane, Degree, QTensor};
use nemfilm_core::solver::{energy_2d, grad_energy_2d, Field2D, Grid2D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(name: &str, pass: bool, detail: String) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load(name: &str) -> Loaded {
    config::load(&config_path(name)).unwrap()
}

fn reduced() -> Potential {
    calibrate(&PotentialParams::reduced(-1.0 / 3.0, -1.0, 1.0, 1.0), 60, 11).unwrap()
}

fn random_q(rng: &mut ChaCha8Rng, amp: f64) -> QTensor {
    QTensor(std::array::from_fn(|_| amp * rng.gen_range(-1.0..1.0)))
}

fn quiet() -> Options {
    Options::default()
}

#[test]
fn c01_gradients_match_finite_differences() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pots = [
        reduced(),
        calibrate(&PotentialParams::full(-1.0 / 3.0, -1.0, 1.0, 1.0, -0.2, 1.0), 60, 11).unwrap(),
    ];
    let mut worst_w = 0.0f64;
    for pot in &pots {
        for _ in 0..100 {
            let q = random_q(&mut rng, 1.5);
            let g = pot.grad_w(&q);
            let fd = QTensor(std::array::from_fn(|i| {
                let mut e = QTensor::ZERO;
                e.0[i] = 1e-6;
                (pot.w(&(q + e)) - pot.w(&(q - e))) / 2e-6
            }));
            worst_w = worst_w.max(g.distance(&fd) / g.norm().max(1.0));
        }
    }

    let pot = &pots[0];
    // 17×17 nodes, 16×16 cells
    let grid = Grid2D::new(make_disk(1.0, 1.0 / 6.0).unwrap()).unwrap();
    let bd = make_boundary_data(
        &grid.domain,
        BoundarySpec::G2 {
            beta: -0.2,
            winding: Degree::from_twice(1),
        },
    );
    let f = grid.field_from(&bd, |_| random_q(&mut rng, 0.7));
    let eps = 0.3;
    let g = grad_energy_2d(&grid, &f, pot, eps);
    let mut worst_e = 0.0f64;
    for _ in 0..50 {
        let d: Vec<QTensor> = (0..grid.domain.len())
            .map(|k| {
                if grid.is_free(k) {
                    random_q(&mut rng, 1.0)
                } else {
                    QTensor::ZERO
                }
            })
            .collect();
        let shifted = |s: f64| Field2D {
            values: f.values.iter().zip(&d).map(|(a, b)| *a + *b * s).collect(),
        };
        let analytic: f64 = g.iter().zip(&d).map(|(a, b)| a.dot(b)).sum();
        let h = 1e-5;
        let fd = (energy_2d(&grid, &shifted(h), pot, eps) - energy_2d(&grid, &shifted(-h), pot, eps)) / (2.0 * h);
        worst_e = worst_e.max((analytic - fd).abs() / analytic.abs().max(1.0));
    }
    report(
        "gradient correctness",
        worst_w < 1e-6 && worst_e < 1e-6,
        format!(
            "grad_w worst rel {worst_w:.2e} (200 tensors), grad_energy_2d worst rel {worst_e:.2e} (50 directions, {}x{} nodes), {:.1}s",
            grid.domain.nx,
            grid.domain.ny,
            t.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn c02_rotation_symmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut closed = true;
    for pot in [
        reduced(),
        calibrate(&PotentialParams::full(-1.0 / 3.0, -1.0, 1.0, 1.0, -0.2, 1.0), 60, 11).unwrap(),
    ] {
        let p = &pot.params;
        for _ in 0..200 {
            let q = random_q(&mut rng, 1.5);
            let r = rotate_z(&q, rng.gen_range(-4.0..4.0));
            for (a, b) in [
                (pot.w(&q), pot.w(&r)),
                (p.f_ldg(&q), p.f_ldg(&r)),
                (p.f_s(&q), p.f_s(&r)),
            ] {
                worst = worst.max((a - b).abs() / a.abs().max(1.0));
            }
        }
        let path = TensorPath::new((0..20).map(|_| random_q(&mut rng, 1.0)).collect());
        let e = path_energy(&path, &pot);
        for theta in [0.4, -1.7, 2.9] {
            let rp = TensorPath::new(path.nodes.iter().map(|q| rotate_z(q, theta)).collect());
            worst = worst.max((path_energy(&rp, &pot) - e).abs() / e.abs().max(1.0));
        }
        let grid = Grid2D::new(make_disk(1.0, 1.0 / 8.0).unwrap()).unwrap();
        let bd = make_boundary_data(
            &grid.domain,
            BoundarySpec::G2 {
                beta: -0.2,
                winding: Degree::from_twice(1),
            },
        );
        let f = grid.field_from(&bd, |_| random_q(&mut rng, 0.8));
        let e = energy_2d(&grid, &f, &pot, 0.2);
        for theta in [0.3, 1.0, -2.2] {
            worst = worst.max((energy_2d(&grid, &f.rotated(theta), &pot, 0.2) - e).abs() / e.abs().max(1.0));
        }
        for well in &pot.wells.components {
            for theta in [0.5, 1.3, 2.8] {
                let r = rotate_z(&well.representative, theta);
                let stays = pot.w(&r) < 1e-8;
                let same = match well.kind {
                    WellKind::Point => r.distance(&well.representative) < 1e-12,
                    _ => stays,
                };
                closed &= stays && same;
            }
        }
    }
    report(
        "rotation symmetry",
        worst < 1e-9 && closed,
        format!(
            "worst relative change {worst:.2e} over W, f_LdG, f_s, path_energy, energy_2d; well set closed: {closed}"
        ),
    );
}

fn grid_scan_min(p: &PotentialParams) -> f64 {
    let mut best = (0.0, p.uniaxial_energy(0.0));
    for i in 0..=200_000 {
        let s = -10.0 + 1e-4 * i as f64;
        let f = p.uniaxial_energy(s);
        if f < best.1 {
            best = (s, f);
        }
    }
    best.0
}

#[test]
fn c03_s_star_and_wells() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut stat, mut scan) = (0.0f64, 0.0f64);
    for k in 0..40 {
        let p = if k == 0 {
            PotentialParams::reduced(-1.0 / 3.0, -1.0, 1.0, 1.0)
        } else {
            PotentialParams::reduced(
                rng.gen_range(-2.0..-0.01),
                rng.gen_range(-2.0..-0.01),
                rng.gen_range(0.3..2.0),
                1.0,
            )
        };
        let s = s_star(&p).value;
        stat = stat.max((3.0 * p.a + p.b * s + 2.0 * p.c * s * s).abs());
        scan = scan.max((s - grid_scan_min(&p)).abs());
    }
    let pot = reduced();
    let kinds: Vec<WellKind> = pot.wells.components.iter().map(|w| w.kind).collect();
    let wells_ok = kinds == [WellKind::Circle, WellKind::Point];
    report(
        "s* and wells",
        stat < 1e-8 && scan < 2e-4 && wells_ok,
        format!(
            "stationarity residual {stat:.1e}, grid-scan gap {scan:.1e} (40 parameter sets); default wells {kinds:?}"
        ),
    );
}

#[test]
fn c04_zhat_eigenvector_cases() {
    let full = |beta, gamma| PotentialParams::full(-1.0 / 3.0, -1.0, 1.0, 1.0, beta, gamma);
    let cases = [
        (
            "1 reduced",
            PotentialParams::reduced(-1.0 / 3.0, -1.0, 1.0, 1.0),
            BetaCase::Reduced,
            true,
        ),
        (
            "1 beta outside every spectrum",
            full(1.0, 1.0),
            BetaCase::NotCombination,
            true,
        ),
        ("2i beta an eigenvalue", full(-1.0 / 3.0, 1.0), BetaCase::Trivial, true),
        ("2ii beta strictly inside", full(0.1, 0.0), BetaCase::Nontrivial, false),
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, p, case, expect) in cases {
        let pot = calibrate(&p, 60, 11).unwrap();
        let reps: Vec<ZhatReport> = zhat_eigenvector_test(&pot);
        let this = reps
            .iter()
            .all(|r| r.case == case && r.zhat_eigenvector == expect && r.consistent());
        let off = reps.iter().map(|r| r.off_axis).fold(0.0, f64::max);
        lines.push(format!("{name}: {} well(s), max off-axis {off:.1e}", reps.len()));
        ok &= this && !reps.is_empty();
    }
    let iso = stationary_point(&full(0.3, 0.0), [0.0; 3], [1.0 / 3.0; 3]);
    let residual = appendix_residual(&iso, &full(0.3, 0.0));
    report(
        "zhat eigenvector cases",
        ok && residual == 0.0,
        format!("{}; isotropic residual {residual}", lines.join("; ")),
    );
}

#[test]
fn c05_boundary_distance_is_constant() {
    let pot = reduced();
    let dom = make_disk(0.75, 0.025).unwrap();
    let spec = BoundarySpec::G2 {
        beta: -0.2,
        winding: Degree::from_twice(1),
    };
    let bd = make_boundary_data(&dom, spec);
    let gc = GeodesicConfig::default();
    let n = dom.boundary.len();
    let vals: Vec<f64> = (0..8)
        .map(|k| {
            let b = &dom.boundary[k * n / 8];
            phi(0, &bd.spec.value([b.x, b.y], b.s, dom.perimeter), &pot, &gc)
                .unwrap()
                .length
        })
        .collect();
    let (lo, hi) = vals
        .iter()
        .fold((f64::MAX, f64::MIN), |a, v| (a.0.min(*v), a.1.max(*v)));
    let spread = (hi - lo) / lo;
    report(
        "boundary distance constancy",
        spread < 0.01,
        format!("phi1(g) in [{lo:.8}, {hi:.8}], spread {spread:.1e}"),
    );
}

#[test]
fn c06_geodesic_matches_slice_oracle() {
    let pot = reduced();
    let g = uniaxial_in_plane(0.6, 0.3);
    let geo = phi(0, &g, &pot, &GeodesicConfig::default()).unwrap();
    let dij = slice_distance(&pot, &g, 0, 400).unwrap();
    let rel = (geo.length - dij.distance) / dij.distance;
    let undercut = rel < -0.02;
    report(
        "geodesic oracle",
        rel.abs() < 0.02 && geo.converged,
        format!(
            "string {:.6}, slice Dijkstra {:.6}, relative {rel:+.2e}, undercut flag {undercut}",
            geo.length, dij.distance
        ),
    );
}

#[test]
fn c07_profile_ode() {
    let pot = reduced();
    let geo = phi(0, &uniaxial_in_plane(0.6, 0.0), &pot, &GeodesicConfig::default()).unwrap();
    let sol = profile_ode(&geo.path, &pot, 12.0, 4000).unwrap();
    let monotone = sol.is_strictly_increasing();
    let (slope, tail_r2) = tail_fit(&sol);
    let cfg = LayerConfig {
        s_max: 12.0,
        steps: 4000,
        kappa: 1.0 / 0.75,
    };
    let eps = [0.1, 0.05, 0.025, 0.0125];
    let excess: Vec<f64> = eps
        .iter()
        .map(|&e| layer_energy_1d(&geo.path, &pot, e, &cfg).unwrap() - 2.0 * geo.length)
        .collect();
    let (c0, c1, r2) = linear_fit(&eps, &excess);
    report(
        "profile ode",
        monotone && tail_r2 > 0.99 && r2 > 0.9,
        format!(
            "monotone {monotone}, tail slope {slope:.3} R² {tail_r2:.5}; layer − 2phi1 = {c0:.2e} + {c1:.4} ε (R² {r2:.5})"
        ),
    );
}

fn sweep_and_fit(name: &str, out: &Path) -> (experiments::AsymptoticFit, f64) {
    let loaded = load(name);
    let summary = experiments::run_scenario(loaded.clone(), out, quiet()).unwrap();
    let s = Setup::new(loaded, quiet()).unwrap();
    let fit = experiments::fit_run(&s, &summary.energies, out).unwrap();
    (fit, s.pot.s_star.value)
}

#[test]
fn c08_asymptotic_development() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (k1, s_star) = sweep_and_fit("disk_k1.toml", &dir.path().join("k1"));
    let (k0, _) = sweep_and_fit("disk_k0.toml", &dir.path().join("k0"));
    let floor = 0.1 * std::f64::consts::PI * s_star * s_star;
    let pass = k1.rel_a < 0.05 && k1.rel_b < 0.15 && k0.b.abs() < floor;
    report(
        "asymptotic development",
        pass,
        format!(
            "k=1: A {:.5} vs {:.5} ({:+.1}%), B {:.4} vs {:.4} ({:+.1}%); k=0: |B| {:.4} vs floor {floor:.4}, A {:+.1}%; {:.0}s",
            k1.a,
            k1.targets.a,
            100.0 * (k1.a - k1.targets.a) / k1.targets.a,
            k1.b,
            k1.targets.b,
            100.0 * (k1.b - k1.targets.b) / k1.targets.b,
            k0.b.abs(),
            100.0 * (k0.a - k0.targets.a) / k0.targets.a,
            t.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn c09_surface_bulk_decay() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let s = experiments::run_scenario(load("thin3d.toml"), dir.path(), quiet()).unwrap();
    let d = s.decay.unwrap();
    report(
        "surface-bulk decay",
        (0.8..=1.5).contains(&d.slope) && s.converged,
        format!(
            "gaps {:?} at eps {:?}: slope {:.4} (R² {:.5}), {:.1}s",
            d.gap,
            d.eps,
            d.slope,
            d.r2,
            t.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn c10_strip_consistency() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let r = experiments::gamma_consistency(load("strip.toml"), dir.path(), quiet()).unwrap();
    let last = r.rows.last().unwrap();
    let devs: Vec<String> = r.rows.iter().map(|row| format!("{:+.3}", row.deviation)).collect();
    report(
        "strip consistency",
        r.deviation_ok && r.monotone,
        format!(
            "F0 {:.5}; deviations [{}]; interface at {:?} vs {:.4} (within 2 cells: {}); {:.0}s",
            r.f0,
            devs.join(", "),
            last.interface_x,
            r.optimal_x,
            r.position_ok,
            t.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn c11_dumbbell_candidate_is_minimal() {
    let dir = tempfile::tempdir().unwrap();
    let d = experiments::dumbbell_setup(load("dumbbell.toml"), quiet()).unwrap();
    let m = experiments::minimality_check(&d, dir.path()).unwrap();
    let strict = m.perturbation.trials.iter().all(|t| t.delta_f0 > 0.0);
    let tilted = m.tilted_gaps.iter().all(|(_, g)| *g > 0.0);
    let zero = m.candidate_gap.abs() < 1e-12;
    report(
        "dumbbell minimality",
        m.perturbation.pass && m.perturbation.trials.len() == 200 && strict && zero && tilted,
        format!(
            "{} trials, min ΔF0 {:.3e}; candidate gap {:.1e}; tilted gaps {:?}",
            m.perturbation.trials.len(),
            m.perturbation.min_delta,
            m.candidate_gap,
            m.tilted_gaps
        ),
    );
}

#[test]
fn c12_constrained_continuation() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = experiments::dumbbell_setup(load("dumbbell.toml"), quiet()).unwrap();
    let r = experiments::local_min_continuation(&d, dir.path()).unwrap();
    let lam: Vec<String> = r
        .rows
        .iter()
        .map(|row| format!("{:.4}/{:.4}", row.lambda, row.delta))
        .collect();
    let last = r.rows.last().unwrap();
    report(
        "constrained continuation",
        r.pass,
        format!(
            "Λ/δ [{}], interior {}; final energy {:+.1}% from F0, interface {:?} (contact {:.4}, in tube {}); {:.0}s",
            lam.join(", "),
            r.all_interior,
            100.0 * last.deviation,
            last.interface_x,
            r.contact_x,
            last.in_tube,
            t.elapsed().as_secs_f64()
        ),
    );
}

fn csv_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn short_sweep(name: &str, eps: &str) -> Loaded {
    let text = std::fs::read_to_string(config_path(name)).unwrap();
    let start = text.find("[sweep]").unwrap();
    let end = text[start..].find("\n\n").map_or(text.len(), |e| start + e);
    let text = format!("{}[sweep]\neps = {eps}\n{}", &text[..start], &text[end..]);
    config::parse(&text).unwrap()
}

#[test]
fn c13_determinism() {
    let two = tempfile::tempdir().unwrap();
    let (a, b) = (two.path().join("a"), two.path().join("b"));
    let threads = |n| Options { threads: n, ..quiet() };
    let mut compared = 0;
    let mut same = true;
    let mut check = |x: &Path, y: &Path| {
        let (cx, cy) = (csv_bytes(x), csv_bytes(y));
        compared += cx.len();
        same &= !cx.is_empty() && cx == cy;
    };

    let disk = short_sweep("disk_k1.toml", "[0.2, 0.1]");
    experiments::run_scenario(disk.clone(), &a.join("disk"), threads(1)).unwrap();
    experiments::run_scenario(disk, &b.join("disk"), threads(2)).unwrap();
    check(&a.join("disk"), &b.join("disk"));

    experiments::run_scenario(load("thin3d.toml"), &a.join("thin"), threads(1)).unwrap();
    experiments::run_scenario(load("thin3d.toml"), &b.join("thin"), threads(2)).unwrap();
    check(&a.join("thin"), &b.join("thin"));

    let strip = short_sweep("strip.toml", "[0.2, 0.1]");
    experiments::gamma_consistency(strip.clone(), &a.join("strip"), threads(1)).unwrap();
    experiments::gamma_consistency(strip, &b.join("strip"), threads(1)).unwrap();
    check(&a.join("strip"), &b.join("strip"));

    for dir in [&a, &b] {
        let d = experiments::dumbbell_setup(load("dumbbell.toml"), quiet()).unwrap();
        experiments::minimality_check(&d, &dir.join("dumbbell")).unwrap();
        experiments::geodesics(load("disk_k1.toml"), &dir.join("geodesic"), quiet()).unwrap();
        experiments::wells(load("disk_k1.toml"), &dir.join("wells"), quiet()).unwrap();
    }
    for sub in ["dumbbell", "geodesic", "wells"] {
        check(&a.join(sub), &b.join(sub));
    }
    report(
        "determinism",
        same,
        format!("{compared} CSV files byte-identical across repeated runs: {same}"),
    );
}

#[test]
fn missing_key_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config_path("disk_k1.toml"))
        .unwrap()
        .replace("radius = 0.75\n", "");
    let cfg = dir.path().join("broken.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nemfilm"))
        .args(["run", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    let stderr = String::from_utf8_lossy(&out.stderr);
    report(
        "missing key exit code",
        out.status.code() == Some(2) && stderr.contains("domain.radius"),
        format!("exit {:?}, stderr {:?}", out.status.code(), stderr.trim()),
    );
}
