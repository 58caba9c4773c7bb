//! Bulk and surface energy densities and the normalized potential `W`.
//!
//! `f_LdG(Q) = a tr Q² + (2b/3) tr Q³ + (c/2)(tr Q²)²` and, in the full variant,
//! `f_s(Q) = γ(Q13² + Q23²) + α(Q33 − β)²`; the reduced variant keeps only the `γ` term.
//! `W = f_LdG + 2 f_s − w_min` where `w_min` is found numerically by [`calibrate`], which
//! also returns the connected components of `{W = 0}`.

pub mod appendix;
pub(crate) mod wells;

pub use wells::{calibrate, calibrate_with, project_to_well, Calibration, Well, WellKind, WellSet};

use crate::error::{input, Result};
use crate::math::{abs, sqrt};
use crate::qtensor::{QTensor, FRAC_1_SQRT_6};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceVariant {
    Full,
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma_s: f64,
    pub variant: SurfaceVariant,
}

impl PotentialParams {
    pub fn reduced(a: f64, b: f64, c: f64, gamma_s: f64) -> Self {
        PotentialParams {
            a,
            b,
            c,
            alpha: 0.0,
            beta: 0.0,
            gamma_s,
            variant: SurfaceVariant::Reduced,
        }
    }

    pub fn full(a: f64, b: f64, c: f64, alpha: f64, beta: f64, gamma_s: f64) -> Self {
        PotentialParams {
            a,
            b,
            c,
            alpha,
            beta,
            gamma_s,
            variant: SurfaceVariant::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.c, self.alpha, self.beta, self.gamma_s];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(input("potential coefficients must be finite"));
        }
        if self.c <= 0.0 {
            return Err(input("c must be positive"));
        }
        if self.alpha < 0.0 || self.gamma_s < 0.0 {
            return Err(input("alpha and gamma_s must be nonnegative"));
        }
        Ok(())
    }

    fn alpha_eff(&self) -> f64 {
        match self.variant {
            SurfaceVariant::Full => self.alpha,
            SurfaceVariant::Reduced => 0.0,
        }
    }

    pub fn f_ldg(&self, q: &QTensor) -> f64 {
        let t2 = q.norm_sq();
        self.a * t2 + (2.0 * self.b / 3.0) * q.tr_cube() + 0.5 * self.c * t2 * t2
    }

    pub fn grad_f_ldg(&self, q: &QTensor) -> QTensor {
        let t2 = q.norm_sq();
        *q * (2.0 * self.a + 2.0 * self.c * t2) + q.square_coords() * (2.0 * self.b)
    }

    pub fn f_s(&self, q: &QTensor) -> f64 {
        let [_, q2, _, q4, q5] = q.0;
        let m33 = 2.0 * q2 * FRAC_1_SQRT_6;
        0.5 * self.gamma_s * (q4 * q4 + q5 * q5) + self.alpha_eff() * (m33 - self.beta) * (m33 - self.beta)
    }

    pub fn grad_f_s(&self, q: &QTensor) -> QTensor {
        let [_, q2, _, q4, q5] = q.0;
        let m33 = 2.0 * q2 * FRAC_1_SQRT_6;
        QTensor([
            0.0,
            4.0 * FRAC_1_SQRT_6 * self.alpha_eff() * (m33 - self.beta),
            0.0,
            self.gamma_s * q4,
            self.gamma_s * q5,
        ])
    }

    /// `f_LdG + 2 f_s` before the additive normalization.
    pub fn raw(&self, q: &QTensor) -> f64 {
        self.f_ldg(q) + 2.0 * self.f_s(q)
    }

    pub fn grad_raw(&self, q: &QTensor) -> QTensor {
        self.grad_f_ldg(q) + self.grad_f_s(q) * 2.0
    }

    /// `f_LdG` restricted to uniaxial states `s(m⊗m − I/3)`.
    pub fn uniaxial_energy(&self, s: f64) -> f64 {
        let (a, b, c) = (self.a, self.b, self.c);
        (2.0 * a / 3.0) * s * s + (4.0 * b / 27.0) * s * s * s + (2.0 * c / 9.0) * s * s * s * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SStar {
    pub value: f64,
    /// The isotropic state `s = 0` minimizes the uniaxial restriction.
    pub isotropic: bool,
}

/// Global minimizer of the uniaxial restriction of `f_LdG`.
///
/// Candidates are `s = 0` and the real roots of `3a + b s + 2c s² = 0`; ties go to the
/// nonzero root so that the coexistence temperature still reports an ordered state.
pub fn s_star(p: &PotentialParams) -> SStar {
    let disc = p.b * p.b - 24.0 * p.a * p.c;
    let mut best = (0.0, p.uniaxial_energy(0.0));
    if disc >= 0.0 {
        let r = sqrt(disc);
        for s in [(-p.b + r) / (4.0 * p.c), (-p.b - r) / (4.0 * p.c)] {
            let f = p.uniaxial_energy(s);
            if s != 0.0 && f <= best.1 + 1e-15 * (1.0 + abs(best.1)) {
                best = (s, f);
            }
        }
    }
    SStar {
        value: best.0,
        isotropic: best.0 == 0.0,
    }
}

/// A calibrated potential: parameters together with the shift `w_min`, the equilibrium
/// order parameter and the wells.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub params: PotentialParams,
    pub w_min: f64,
    pub s_star: SStar,
    pub wells: WellSet,
}

impl Potential {
    /// `W(Q) = f_LdG + 2 f_s − w_min`.
    pub fn w(&self, q: &QTensor) -> f64 {
        self.params.raw(q) - self.w_min
    }

    pub fn grad_w(&self, q: &QTensor) -> QTensor {
        self.params.grad_raw(q)
    }

    pub fn sqrt_w(&self, q: &QTensor) -> f64 {
        sqrt(self.w(q).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtensor::{eigs, rotate_z, uniaxial, uniaxial_zhat};
    use proptest::prelude::*;

    fn default_reduced() -> PotentialParams {
        PotentialParams::reduced(-1.0 / 3.0, -1.0, 1.0, 1.0)
    }

    /// Independent evaluation of `f_LdG` from the spectrum.
    fn f_ldg_from_eigs(p: &PotentialParams, q: &QTensor) -> f64 {
        let l = eigs(q).lambda;
        let t2: f64 = l.iter().map(|v| v * v).sum();
        let t3: f64 = l.iter().map(|v| v * v * v).sum();
        p.a * t2 + 2.0 * p.b / 3.0 * t3 + 0.5 * p.c * t2 * t2
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
    fn zero_tensor_values() {
        let p = PotentialParams::full(-0.3, -1.0, 1.0, 0.7, 0.25, 1.0);
        assert_eq!(p.f_ldg(&QTensor::ZERO), 0.0);
        assert!(abs(p.f_s(&QTensor::ZERO) - 0.7 * 0.25 * 0.25) < 1e-15);
    }

    #[test]
    fn surface_zero_on_zhat_eigenvector_with_eigenvalue_beta() {
        let beta = 0.4;
        let p = PotentialParams::full(-0.3, -1.0, 1.0, 0.7, beta, 1.0);
        // ẑ director with M33 = 2s/3 = β
        let q = uniaxial_zhat(1.5 * beta);
        assert!(p.f_s(&q) < 1e-15);
    }

    #[test]
    fn s_star_examples() {
        let p = PotentialParams::reduced(0.0, -1.0, 1.0, 0.0);
        let s = s_star(&p);
        assert!(abs(s.value - 0.5) < 1e-12 && !s.isotropic);
        assert!(abs(s.value - grid_scan_min(&p)) < 2e-4);
        let p = PotentialParams::reduced(0.5, 0.0, 1.0, 0.0);
        assert_eq!(
            s_star(&p),
            SStar {
                value: 0.0,
                isotropic: true
            }
        );
        assert!(abs(s_star(&default_reduced()).value - 1.0) < 1e-14);
    }

    #[test]
    fn uniaxial_energy_matches_direct_evaluation() {
        let p = default_reduced();
        let mut rng = 12345u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let s = 4.0 * next() - 2.0;
            let (th, ph) = (core::f64::consts::PI * next(), 6.3 * next());
            let m = [
                libm::sin(th) * libm::cos(ph),
                libm::sin(th) * libm::sin(ph),
                libm::cos(th),
            ];
            let q = uniaxial(s, m).unwrap();
            assert!(abs(p.f_ldg(&q) - p.uniaxial_energy(s)) < 1e-12);
            assert!(abs(f_ldg_from_eigs(&p, &q) - p.uniaxial_energy(s)) < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn s_star_is_stationary_and_global(a in -2.0f64..0.0, b in -2.0f64..0.0, c in 0.3f64..2.0) {
            let p = PotentialParams::reduced(a, b, c, 0.0);
            let s = s_star(&p).value;
            prop_assert!(abs(3.0 * a + b * s + 2.0 * c * s * s) < 1e-8);
            prop_assert!(abs(s - grid_scan_min(&p)) < 2e-4);
        }

        #[test]
        fn raw_gradient_matches_finite_differences(
            q in prop::array::uniform5(-1.0f64..1.0),
            full in any::<bool>(),
        ) {
            let q = QTensor(q);
            let p = if full {
                PotentialParams::full(-0.4, -1.1, 0.9, 0.8, 0.3, 1.3)
            } else {
                default_reduced()
            };
            let g = p.grad_raw(&q);
            let h = 1e-5;
            for k in 0..5 {
                let mut e = QTensor::ZERO;
                e[k] = h;
                let fd = (p.raw(&(q + e)) - p.raw(&(q - e))) / (2.0 * h);
                prop_assert!(abs(fd - g[k]) <= 1e-6 * (1.0 + abs(g[k])));
            }
        }

        #[test]
        fn densities_are_rotation_invariant(q in prop::array::uniform5(-2.0f64..2.0), t in -4.0f64..4.0) {
            let q = QTensor(q);
            let r = rotate_z(&q, t);
            let p = PotentialParams::full(-0.4, -1.1, 0.9, 0.8, 0.3, 1.3);
            prop_assert!(abs(p.f_ldg(&q) - p.f_ldg(&r)) < 1e-10);
            prop_assert!(abs(p.f_s(&q) - p.f_s(&r)) < 1e-10);
            prop_assert!(abs(f_ldg_from_eigs(&p, &q) - p.f_ldg(&q)) < 1e-9);
        }
    }
}
