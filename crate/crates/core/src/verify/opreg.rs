//! The regularized flux map `a_ε(z) = z/√(1 - η_ε²(|z|)|z|²)`: below norm
//! `1-ε` it coincides with the raw flux `z/√(1-|z|²)`, above `1-ε/2` the
//! cutoff plateaus, and in between `η_ε(r)·r` ramps by a monotone C² quintic.
//! The map then satisfies uniform growth and ellipticity conditions with
//! constants depending only on `ε`, which is what the structure checks
//! certify.

use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegularizedOperator {
    pub epsilon: f64,
}

impl RegularizedOperator {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0 < epsilon && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("ε = {epsilon} outside (0,1)")));
        }
        Ok(Self { epsilon })
    }

    /// `m(r) = η_ε(r)·r`: the clamped norm entering the flux denominator.
    /// Equals `r` for `r ≤ 1-ε`, `1-ε/2` for `r ≥ 1-ε/2`, quintic between
    /// (slope 1 and curvature 0 on the left, slope and curvature 0 on the
    /// right; monotone).
    pub fn clamped_norm(&self, r: f64) -> f64 {
        let a = 1.0 - self.epsilon;
        let b = 1.0 - 0.5 * self.epsilon;
        if r <= a {
            return r;
        }
        if r >= b {
            return b;
        }
        let hh = b - a;
        let t = (r - a) / hh;
        // p(t) = t + 4t³ - 7t⁴ + 3t⁵ rises by 1 with p'(0)=1, p'(1)=0 and
        // vanishing second derivatives at both ends.
        a + hh * (t + 4.0 * t.powi(3) - 7.0 * t.powi(4) + 3.0 * t.powi(5))
    }

    /// `m'(r)`; in `[0, 2.52]`, zero on the plateau.
    pub fn clamped_norm_derivative(&self, r: f64) -> f64 {
        let a = 1.0 - self.epsilon;
        let b = 1.0 - 0.5 * self.epsilon;
        if r <= a {
            return 1.0;
        }
        if r >= b {
            return 0.0;
        }
        let t = (r - a) / (b - a);
        1.0 + 12.0 * t * t - 28.0 * t.powi(3) + 15.0 * t.powi(4)
    }

    /// `f_ε(r) = 1/√(1 - m(r)²)`.
    pub fn flux_factor(&self, r: f64) -> f64 {
        let m = self.clamped_norm(r);
        1.0 / (1.0 - m * m).sqrt()
    }

    /// `f_ε'(r) = m m'/(1-m²)^{3/2} ≥ 0`.
    pub fn flux_factor_derivative(&self, r: f64) -> f64 {
        let m = self.clamped_norm(r);
        let mp = self.clamped_norm_derivative(r);
        m * mp / (1.0 - m * m).powf(1.5)
    }

    /// The plateau value of `f_ε`: `1/√(ε - ε²/4)` (attained for
    /// `|z| ≥ 1-ε/2`); also the upper bound `1 ≤ f_ε ≤` it satisfies.
    pub fn plateau_flux_bound(&self) -> f64 {
        1.0 / (self.epsilon - self.epsilon * self.epsilon / 4.0).sqrt()
    }

    /// `a_ε(z) = f_ε(|z|) z`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let r = norm(z);
        let f = self.flux_factor(r);
        z.iter().map(|&x| f * x).collect()
    }

    /// Jacobian `∂a_ε(z) = f'(|z|) z zᵀ/|z| + f(|z|) I` (dense, symmetric).
    pub fn jacobian(&self, z: &[f64]) -> Vec<Vec<f64>> {
        let dim = z.len();
        let r = norm(z);
        let mut j = vec![vec![0.0; dim]; dim];
        if r < 1e-300 {
            for (i, row) in j.iter_mut().enumerate() {
                row[i] = 1.0; // f(0) = 1, f'(0) = 0
            }
            return j;
        }
        let f = self.flux_factor(r);
        let fp = self.flux_factor_derivative(r);
        for i in 0..dim {
            for k in 0..dim {
                j[i][k] = fp * z[i] * z[k] / r;
                if i == k {
                    j[i][k] += f;
                }
            }
        }
        j
    }

    /// Spectral norm of the Jacobian: `f + f'|z|` for this rank-one-plus-
    /// identity structure (all other eigenvalues are `f`).
    pub fn jacobian_norm(&self, r: f64) -> f64 {
        self.flux_factor(r) + self.flux_factor_derivative(r) * r
    }

    /// Structure checks over deterministic probes plus seeded random
    /// `(z, λ)` pairs.
    pub fn check_structure_conditions(
        &self,
        dim: usize,
        samples: usize,
        seed: u64,
    ) -> Result<StructureReport> {
        if samples < 1 {
            return Err(Error::InvalidParameter("need at least one sample".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut min_ellipticity_ratio = f64::INFINITY;
        let mut l_empirical = 0.0f64;
        let mut max_fd_error = 0.0f64;
        let mut min_eigenvalue = f64::INFINITY;

        let probes = [
            0.0,
            0.5 * (1.0 - self.epsilon),
            1.0 - self.epsilon,
            1.0 - 0.75 * self.epsilon,
            1.0 - 0.5 * self.epsilon,
            1.0,
            2.0,
            2.5,
        ];
        let total = samples + probes.len();
        for k in 0..total {
            let radius = if k < probes.len() {
                probes[k]
            } else {
                rng.gen_range(0.0..2.5)
            };
            let mut z: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let zn = norm(&z).max(1e-12);
            for x in &mut z {
                *x *= radius / zn;
            }
            let mut lambda: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ln = norm(&lambda).max(1e-12);
            for x in &mut lambda {
                *x /= ln;
            }

            let j = self.jacobian(&z);
            // Ellipticity: (∂a_ε λ, λ) ≥ |λ|².
            let mut quad = 0.0;
            for i in 0..dim {
                for m in 0..dim {
                    quad += j[i][m] * lambda[i] * lambda[m];
                }
            }
            min_ellipticity_ratio = min_ellipticity_ratio.min(quad);

            // Eigenvalues are f and f + f'|z|; both must be ≥ 1.
            let r = norm(&z);
            min_eigenvalue = min_eigenvalue
                .min(self.flux_factor(r))
                .min(self.jacobian_norm(r));

            // Growth: (|a(z)| + ‖∂a(z)‖ |z|)/|z| ≤ L.
            if r > 1e-9 {
                let ratio = (self.flux_factor(r) * r + self.jacobian_norm(r) * r) / r;
                l_empirical = l_empirical.max(ratio);
            }

            // Cross-check the analytic Jacobian against central differences.
            let step = 1e-6;
            for col in 0..dim {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[col] += step;
                zm[col] -= step;
                let ap = self.apply(&zp);
                let am = self.apply(&zm);
                for row in 0..dim {
                    let fd = (ap[row] - am[row]) / (2.0 * step);
                    max_fd_error = max_fd_error.max((fd - j[row][col]).abs());
                }
            }
        }
        Ok(StructureReport {
            epsilon: self.epsilon,
            samples: total,
            l_empirical,
            min_ellipticity_ratio,
            min_eigenvalue,
            max_fd_jacobian_error: max_fd_error,
            plateau_flux_bound: self.plateau_flux_bound(),
        })
    }
}

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureReport {
    pub epsilon: f64,
    pub samples: usize,
    /// Supremum of the growth ratio `(|a_ε(z)| + ‖∂a_ε(z)‖|z|)/|z|`.
    pub l_empirical: f64,
    /// Minimum of `(∂a_ε λ, λ)` over unit `λ`; the condition requires ≥ 1.
    pub min_ellipticity_ratio: f64,
    pub min_eigenvalue: f64,
    pub max_fd_jacobian_error: f64,
    pub plateau_flux_bound: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_maps_to_zero_with_identity_jacobian() {
        let op = RegularizedOperator::new(0.1).unwrap();
        let z = [0.0, 0.0, 0.0];
        assert!(op.apply(&z).iter().all(|&x| x == 0.0));
        let j = op.jacobian(&z);
        for i in 0..3 {
            for k in 0..3 {
                assert_eq!(j[i][k], if i == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn below_the_cutoff_it_is_the_raw_flux() {
        let op = RegularizedOperator::new(0.1).unwrap();
        // |z| = 0.5 < 1 - ε: a_ε(z) = z/√0.75.
        let z = [0.3, 0.4, 0.0];
        let a = op.apply(&z);
        for (ai, zi) in a.iter().zip(&z) {
            assert_relative_eq!(*ai, zi / 0.75f64.sqrt(), max_relative = 1e-15);
        }
        // Machine-precision agreement across the whole region |z| ≤ 1-ε.
        for r in [0.1, 0.5, 0.8, 0.9] {
            assert_relative_eq!(
                op.flux_factor(r),
                1.0 / (1.0 - r * r).sqrt(),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn plateau_value_matches_closed_form() {
        let eps = 0.1;
        let op = RegularizedOperator::new(eps).unwrap();
        // |z| = 2 ≥ 1-ε/2: |a_ε(z)| = 2/√(1-(1-ε/2)²) = 2/√(1-0.9025).
        let z = [2.0, 0.0, 0.0];
        let a = op.apply(&z);
        assert_relative_eq!(
            norm(&a),
            2.0 / (1.0f64 - 0.9025).sqrt(),
            max_relative = 1e-13
        );
        assert_relative_eq!(
            op.plateau_flux_bound(),
            1.0 / (eps - eps * eps / 4.0f64).sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn clamp_is_monotone_and_c1able() {
        let op = RegularizedOperator::new(0.2).unwrap();
        let mut prev = -1.0;
        for i in 0..=400 {
            let r = 1.2 * i as f64 / 400.0;
            let m = op.clamped_norm(r);
            assert!(m >= prev - 1e-15, "m must be nondecreasing");
            prev = m;
            // Derivative consistency by finite differences.
            let fd = (op.clamped_norm(r + 1e-7) - op.clamped_norm(r - 1e-7)) / 2e-7;
            assert!((fd - op.clamped_norm_derivative(r)).abs() < 1e-5);
        }
    }

    #[test]
    fn structure_conditions_hold() {
        for eps in [0.05, 0.1, 0.3] {
            let op = RegularizedOperator::new(eps).unwrap();
            let rep = op.check_structure_conditions(3, 2000, 11).unwrap();
            assert!(
                rep.min_ellipticity_ratio >= 1.0 - 1e-10,
                "ellipticity failed at ε={eps}: {}",
                rep.min_ellipticity_ratio
            );
            assert!(rep.min_eigenvalue >= 1.0 - 1e-12);
            assert!(rep.max_fd_jacobian_error < 1e-6, "FD mismatch {}", rep.max_fd_jacobian_error);
            assert!(rep.l_empirical.is_finite());
            assert!(
                rep.l_empirical >= rep.plateau_flux_bound,
                "L = {} below the plateau bound {}",
                rep.l_empirical,
                rep.plateau_flux_bound
            );
        }
    }
}
