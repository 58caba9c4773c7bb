//! Scenario files: TOML with the sections `scenario`, `potential`, `domain`, `boundary`,
//! `solver`, `sweep` and the optional `gamma`.

use std::path::Path;

use nemfilm_core::domain::{make_disk, make_dumbbell, make_strip, BoundarySpec, Domain2D, DumbbellSpec};
use nemfilm_core::optim::Method;
use nemfilm_core::potential::{calibrate, Potential, PotentialParams};
use nemfilm_core::qtensor::Degree;
use nemfilm_core::solver::SolveConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A configuration problem; the CLI maps it to exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn missing(key: &str) -> ConfigError {
    ConfigError(format!("missing required key `{key}`"))
}

fn invalid(key: &str, why: &str) -> ConfigError {
    ConfigError(format!("`{key}` {why}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: Scenario,
    pub potential: PotentialSection,
    pub domain: DomainSection,
    pub boundary: BoundarySection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub gamma: GammaSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Planar,
    Thin3d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub seed: u64,
    /// Number of `z` layers; thin-film runs only.
    pub layers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Reduced,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub variant: Variant,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub gamma: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    #[serde(default = "default_starts")]
    pub starts: usize,
}

fn default_starts() -> usize {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSection {
    Disk {
        radius: f64,
    },
    Strip {
        length: f64,
        height: f64,
    },
    Dumbbell {
        neck_half_width: f64,
        neck_convexity: f64,
        bulb_radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BoundarySection {
    G1 {
        beta: f64,
    },
    /// `degree` is the director winding, a multiple of 1/2.
    G2 {
        beta: f64,
        degree: f64,
    },
    /// Constant data equal to a well representative.
    Well {
        well: usize,
    },
    /// Linear ramp in `x` between two well representatives.
    Ramp {
        left_well: usize,
        right_well: usize,
        center: f64,
        width: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    QuasiNewton,
    GradientFlow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub method: MethodName,
    pub grad_tol: f64,
    pub max_iters: usize,
    #[serde(default = "default_value_tol")]
    pub value_tol: f64,
    #[serde(default = "default_memory")]
    pub memory: usize,
    /// Amplitude taper radius in units of `ε`; defaults to 1 for nonzero degree.
    pub taper: Option<f64>,
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "default_defect_threshold")]
    pub defect_threshold: f64,
    #[serde(default = "default_phi_table")]
    pub phi_table: usize,
}

fn default_value_tol() -> f64 {
    1e-12
}
fn default_memory() -> usize {
    8
}
fn default_defect_threshold() -> f64 {
    0.1
}
fn default_phi_table() -> usize {
    201
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit list; otherwise `count` geometric values from `eps_max` down to `eps_min`.
    pub eps: Option<Vec<f64>>,
    pub eps_max: Option<f64>,
    pub eps_min: Option<f64>,
    pub count: Option<usize>,
    /// `ε/h`, unless `h` fixes the spacing.
    #[serde(default = "default_cells_per_eps")]
    pub cells_per_eps: f64,
    pub h: Option<f64>,
    #[serde(default = "default_max_cells")]
    pub max_cells: usize,
}

fn default_cells_per_eps() -> f64 {
    4.0
}
fn default_max_cells() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaSection {
    pub trials: usize,
    /// L¹ radius of the perturbation test; the admissible value from the domain when absent.
    pub delta_l1: Option<f64>,
    pub outline_spacing: f64,
    pub slide_max: f64,
    pub slide_points: usize,
    /// Radius of the Λ ball; `0.1·|Ω|·max φ_i(P_j)` when absent.
    pub ball_delta: Option<f64>,
    pub ball_mu: f64,
    pub ball_margin: f64,
    /// Width of the lifted boundary layer in units of `ε`.
    pub layer_width: f64,
}

impl Default for GammaSection {
    fn default() -> Self {
        GammaSection {
            trials: 200,
            delta_l1: None,
            outline_spacing: 0.005,
            slide_max: 0.05,
            slide_points: 21,
            ball_delta: None,
            ball_mu: 1e3,
            ball_margin: 0.05,
            layer_width: 3.0,
        }
    }
}

/// A parsed configuration together with the hash of its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub config: Config,
    pub sha256: String,
}

pub fn parse(text: &str) -> Result<Loaded, ConfigError> {
    let config: Config = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        // serde reports "missing field `x`"; name the full key when the span allows
        match (msg.strip_prefix("missing field "), e.span()) {
            (Some(field), Some(span)) => {
                let section = section_at(text, span);
                let field = field.trim_matches('`');
                match section {
                    Some(s) => missing(&format!("{s}.{field}")),
                    None => missing(field),
                }
            }
            _ => ConfigError(msg.trim().to_string()),
        }
    })?;
    config.validate()?;
    Ok(Loaded {
        config,
        sha256: hex::encode(Sha256::digest(text.as_bytes())),
    })
}

/// Table name when the error span is a `[table]` header; top-level keys have no header.
fn section_at(text: &str, span: std::ops::Range<usize>) -> Option<String> {
    let line = text.get(span)?.trim_start().lines().next()?.trim();
    let name = line.strip_prefix('[')?.split(']').next()?;
    Some(name.trim_matches('[').trim().to_string())
}

pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.scenario.kind == Kind::Thin3d {
            match self.scenario.layers {
                None => return Err(missing("scenario.layers")),
                Some(n) if !(2..=8).contains(&n) => return Err(invalid("scenario.layers", "must lie in 2..=8")),
                _ => {}
            }
        }
        if self.potential.variant == Variant::Full {
            if self.potential.alpha.is_none() {
                return Err(missing("potential.alpha"));
            }
            if self.potential.beta.is_none() {
                return Err(missing("potential.beta"));
            }
        }
        self.params().validate().map_err(|e| ConfigError(e.to_string()))?;
        if let BoundarySection::G2 { degree, .. } = self.boundary {
            if (2.0 * degree).fract() != 0.0 {
                return Err(invalid("boundary.degree", "must be a multiple of 1/2"));
            }
        }
        let eps = self.eps_list()?;
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("sweep.eps", "must be strictly decreasing"));
        }
        if eps.iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("sweep.eps", "must be positive"));
        }
        if !(self.sweep.cells_per_eps > 0.0) {
            return Err(invalid("sweep.cells_per_eps", "must be positive"));
        }
        if !(self.solver.grad_tol > 0.0) {
            return Err(invalid("solver.grad_tol", "must be positive"));
        }
        Ok(())
    }

    pub fn params(&self) -> PotentialParams {
        let p = &self.potential;
        match p.variant {
            Variant::Reduced => PotentialParams::reduced(p.a, p.b, p.c, p.gamma),
            Variant::Full => {
                PotentialParams::full(p.a, p.b, p.c, p.alpha.unwrap_or(0.0), p.beta.unwrap_or(0.0), p.gamma)
            }
        }
    }

    pub fn potential(&self, seed: u64) -> nemfilm_core::Result<Potential> {
        calibrate(&self.params(), self.potential.starts, seed)
    }

    pub fn eps_list(&self) -> Result<Vec<f64>, ConfigError> {
        let s = &self.sweep;
        if let Some(list) = &s.eps {
            if list.is_empty() {
                return Err(invalid("sweep.eps", "must not be empty"));
            }
            return Ok(list.clone());
        }
        let hi = s.eps_max.ok_or_else(|| missing("sweep.eps_max"))?;
        let lo = s.eps_min.ok_or_else(|| missing("sweep.eps_min"))?;
        let n = s.count.ok_or_else(|| missing("sweep.count"))?;
        if n == 0 {
            return Err(invalid("sweep.count", "must be at least 1"));
        }
        if n == 1 {
            return Ok(vec![hi]);
        }
        Ok((0..n).map(|k| hi * (lo / hi).powf(k as f64 / (n - 1) as f64)).collect())
    }

    pub fn spacing(&self, eps: f64) -> f64 {
        self.sweep.h.unwrap_or(eps / self.sweep.cells_per_eps)
    }

    pub fn solve_config(&self, eps: f64, seed: u64) -> SolveConfig {
        let s = &self.solver;
        let mut cfg = SolveConfig::new(eps);
        cfg.method = match s.method {
            MethodName::QuasiNewton => Method::QuasiNewton,
            MethodName::GradientFlow => Method::GradientFlow,
        };
        cfg.grad_tol = s.grad_tol;
        cfg.value_tol = s.value_tol;
        cfg.max_iters = s.max_iters;
        cfg.memory = s.memory;
        cfg.seed = seed;
        cfg
    }

    /// Builds the domain at spacing `h`. Dumbbells need the partition costs.
    pub fn domain(&self, h: f64, costs: Option<[f64; 3]>) -> Result<Domain2D, ConfigError> {
        let dom = match self.domain {
            DomainSection::Disk { radius } => make_disk(radius, h),
            DomainSection::Strip { length, height } => make_strip(length, height, h),
            DomainSection::Dumbbell { .. } => {
                let costs = costs.ok_or_else(|| ConfigError("dumbbell domains need partition costs".into()))?;
                make_dumbbell(&self.dumbbell_spec(costs).expect("dumbbell section"), h)
            }
        }
        .map_err(|e| ConfigError(format!("domain: {e}")))?;
        let cells = dom.nx.max(dom.ny);
        if cells > self.sweep.max_cells {
            return Err(ConfigError(format!(
                "grid of {cells} cells per side at h = {h} exceeds sweep.max_cells = {}",
                self.sweep.max_cells
            )));
        }
        Ok(dom)
    }

    pub fn dumbbell_spec(&self, costs: [f64; 3]) -> Option<DumbbellSpec> {
        match self.domain {
            DomainSection::Dumbbell {
                neck_half_width,
                neck_convexity,
                bulb_radius,
            } => Some(DumbbellSpec {
                neck_half_width,
                neck_convexity,
                bulb_radius,
                costs,
            }),
            _ => None,
        }
    }

    /// Exact perimeter of the continuum domain where it has a closed form.
    pub fn perimeter(&self) -> Option<f64> {
        match self.domain {
            DomainSection::Disk { radius } => Some(std::f64::consts::TAU * radius),
            DomainSection::Strip { length, height } => Some(2.0 * (length + height)),
            DomainSection::Dumbbell { .. } => None,
        }
    }

    pub fn boundary_spec(&self, pot: &Potential) -> Result<BoundarySpec, ConfigError> {
        let well = |i: usize, key: &str| {
            pot.wells.get(i).map(|w| w.representative).ok_or_else(|| {
                invalid(
                    key,
                    &format!("names well {i} but the potential has {}", pot.wells.len()),
                )
            })
        };
        Ok(match self.boundary {
            BoundarySection::G1 { beta } => BoundarySpec::G1 { beta },
            BoundarySection::G2 { beta, degree } => BoundarySpec::G2 {
                beta,
                winding: Degree::from_f64(degree),
            },
            BoundarySection::Well { well: i } => BoundarySpec::Uniform {
                value: well(i, "boundary.well")?,
            },
            BoundarySection::Ramp {
                left_well,
                right_well,
                center,
                width,
            } => BoundarySpec::Ramp {
                left: well(left_well, "boundary.left_well")?,
                right: well(right_well, "boundary.right_well")?,
                center,
                width,
            },
        })
    }

    pub fn degree(&self) -> Degree {
        match self.boundary {
            BoundarySection::G2 { degree, .. } => Degree::from_f64(degree),
            _ => Degree::ZERO,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[scenario]
name = "t"
kind = "planar"
seed = 1

[potential]
variant = "reduced"
a = -0.3333333333333333
b = -1.0
c = 1.0
gamma = 1.0

[domain]
shape = "disk"
radius = 0.75

[boundary]
kind = "g2"
beta = -0.2
degree = 0.5

[solver]
method = "quasi-newton"
grad_tol = 1e-7
max_iters = 1000

[sweep]
eps_max = 0.2
eps_min = 0.025
count = 6
"#;

    #[test]
    fn parses_and_expands_the_sweep() {
        let l = parse(BASE).unwrap();
        let eps = l.config.eps_list().unwrap();
        assert_eq!(eps.len(), 6);
        assert!((eps[5] - 0.025).abs() < 1e-15);
        assert_eq!(l.config.degree(), Degree::from_twice(1));
        assert_eq!(l.sha256.len(), 64);
    }

    #[test]
    fn missing_keys_are_named() {
        let e = parse(&BASE.replace("radius = 0.75\n", "")).unwrap_err();
        assert!(e.0.contains("domain.radius"), "{e}");
        let e = parse(&BASE.replace("grad_tol = 1e-7\n", "")).unwrap_err();
        assert!(e.0.contains("solver.grad_tol"), "{e}");
        let e = parse(&BASE.replace("count = 6\n", "")).unwrap_err();
        assert!(e.0.contains("sweep.count"), "{e}");
        let e = parse(&BASE.replace("variant = \"reduced\"", "variant = \"full\"")).unwrap_err();
        assert!(e.0.contains("potential.alpha"), "{e}");
        let e = parse(&BASE.replace("kind = \"planar\"", "kind = \"thin3d\"")).unwrap_err();
        assert!(e.0.contains("scenario.layers"), "{e}");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(parse(&BASE.replace("degree = 0.5", "degree = 0.3")).is_err());
        assert!(parse(&BASE.replace("count = 6", "count = 6\neps = [0.1, 0.2]")).is_err());
        assert!(parse(&BASE.replace("seed = 1", "seed = 1\nbogus = 2")).is_err());
    }
}
