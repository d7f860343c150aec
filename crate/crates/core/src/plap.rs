//! Truncated power-series approximation of the field energy: the integrand
//! `1 - √(1-s)` (with `s = |∇u|²`) expands into `Σ_h c_h s^h` with positive
//! coefficients, and truncating at order `k` yields a smooth polynomial
//! energy that needs no gradient constraint.
//!
//! Coefficients come from the Taylor identity in exact rational arithmetic
//! rather than any printed closed form; the remainder oracle in the tests
//! pins them down.

use crate::grid::{
    cell_gradient_norms_sq, cell_gradients, gradient, sup_gradient_norm, BoxGrid, GridField,
};
use crate::minimize::{EnergyConfig, StepRule};
use crate::{Error, Result};
use num::rational::BigRational;
use num::{BigInt, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};

/// Coefficients `c_1 … c_k` of `1 - √(1-s) = Σ c_h s^h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoefficients {
    order: usize,
    coefficients: Vec<f64>,
}

/// Taylor coefficients by the binomial recurrence in exact rationals:
/// the `s^h` term of `√(1-s)` is `t_h = t_{h-1}·(h - 3/2)/h`, `t_0 = 1`,
/// and `c_h = -t_h > 0`.
pub fn series_coefficients(k: usize) -> Result<SeriesCoefficients> {
    if k < 1 {
        return Err(Error::InvalidParameter("series order must be ≥ 1".into()));
    }
    let mut coefficients = Vec::with_capacity(k);
    let mut t = BigRational::from_integer(BigInt::from(1));
    for h in 1..=k {
        let num = BigRational::new(BigInt::from(2 * h as i64 - 3), BigInt::from(2));
        let den = BigRational::from_i64(h as i64).unwrap();
        t = t * num / den;
        let c = -t.clone();
        coefficients.push(c.to_f64().ok_or_else(|| {
            Error::InvalidParameter(format!("coefficient c_{h} out of f64 range"))
        })?);
    }
    Ok(SeriesCoefficients { order: k, coefficients })
}

impl SeriesCoefficients {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `Σ_{h≤k} c_h s^h` by Horner.
    pub fn partial_sum(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coefficients.iter().rev() {
            acc = s * (c + acc);
        }
        acc
    }

    /// Derivative `Σ_{h≤k} h c_h s^{h-1}` (enters the flux as `2 p'(s) ∇u`).
    pub fn partial_sum_derivative(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for (h, &c) in self.coefficients.iter().enumerate().rev() {
            acc = acc * s + (h as f64 + 1.0) * c;
        }
        acc
    }
}

/// Truncated energy `Σ_cells Σ_h c_h |∇u|^{2h} h^N - Σ ρu h^N`; defined for
/// every gradient, no constraint.
pub fn truncated_energy(
    u: &GridField,
    rho_nodes: &[f64],
    coeffs: &SeriesCoefficients,
) -> f64 {
    let grid = u.grid();
    let hn = grid.cell_volume();
    let norms_sq = cell_gradient_norms_sq(&cell_gradients(u), grid.dim());
    let field: f64 = norms_sq.iter().map(|&s| coeffs.partial_sum(s)).sum();
    let coupling: f64 = rho_nodes.iter().zip(u.values()).map(|(r, v)| r * v).sum();
    (field - coupling) * hn
}

/// Gradient of the truncated energy with respect to nodal values.
pub fn truncated_energy_gradient(
    u: &GridField,
    rho_nodes: &[f64],
    coeffs: &SeriesCoefficients,
) -> Vec<f64> {
    let grid = u.grid();
    let dim = grid.dim();
    let hn = grid.cell_volume();
    let mut grads = cell_gradients(u);
    for cell in 0..grid.cell_count() {
        let g = &mut grads[cell * dim..(cell + 1) * dim];
        let s: f64 = g.iter().map(|x| x * x).sum();
        let w = 2.0 * coeffs.partial_sum_derivative(s);
        for x in g {
            *x *= w;
        }
    }
    let mut out = crate::grid::cell_field_adjoint(grid, &grads);
    let mut coords = vec![0usize; dim];
    for (idx, slot) in out.iter_mut().enumerate() {
        grid.node_coords(idx, &mut coords);
        if grid.is_boundary_coords(&coords) {
            *slot = 0.0;
        } else {
            *slot = (*slot - rho_nodes[idx]) * hn;
        }
    }
    out
}

/// The two summands of the order-`2k` gradient norm and their combination
/// `|∇u|₂² + |∇u|_{2k}` (the square of the associated norm).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct X2kNorm {
    pub grad_l2_sq: f64,
    pub grad_l2k: f64,
    pub combined_sq: f64,
}

pub fn xnorm_2k(u: &GridField, k: usize) -> Result<X2kNorm> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be ≥ 1".into()));
    }
    let grid = u.grid();
    let hn = grid.cell_volume();
    let norms_sq = cell_gradient_norms_sq(&cell_gradients(u), grid.dim());
    let grad_l2_sq: f64 = norms_sq.iter().sum::<f64>() * hn;
    let p = k as f64;
    let grad_l2k = (norms_sq.iter().map(|&s| s.powf(p)).sum::<f64>() * hn)
        .powf(1.0 / (2.0 * p));
    Ok(X2kNorm { grad_l2_sq, grad_l2k, combined_sq: grad_l2_sq + grad_l2k })
}

/// Result of minimizing a truncated energy (unconstrained: the sup gradient
/// may legitimately exceed 1 and is reported, not rejected).
#[derive(Debug, Clone)]
pub struct TruncatedMinimizeResult {
    pub field: GridField,
    pub energy: f64,
    pub iterations: usize,
    pub sup_gradient_norm: f64,
    pub converged: bool,
}

/// Unconstrained descent on the polynomial energy (Barzilai-Borwein steps
/// with Armijo backtracking; the polynomial growth keeps it coercive).
pub fn minimize_truncated(
    rho_nodes: &[f64],
    grid: &BoxGrid,
    k: usize,
    config: &EnergyConfig,
) -> Result<TruncatedMinimizeResult> {
    config.validate()?;
    let coeffs = series_coefficients(k)?;
    let hn = grid.cell_volume();
    let h = grid.spacing();
    let mut u = GridField::zeros(*grid);
    let mut e = truncated_energy(&u, rho_nodes, &coeffs);
    let mut grad = truncated_energy_gradient(&u, rho_nodes, &coeffs);
    let mut step = config.initial_step.unwrap_or(h * h / grid.dim() as f64);
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..config.max_iterations {
        iterations = it + 1;
        let dir: Vec<f64> = grad.iter().map(|g| -g / hn).collect();
        let dir_norm_sq: f64 = dir.iter().map(|d| d * d).sum();
        if dir_norm_sq == 0.0 {
            converged = true;
            break;
        }
        let mut t = step;
        let mut accepted = false;
        let mut next = u.clone();
        let mut e_next = e;
        for _ in 0..60 {
            let vals: Vec<f64> = u
                .values()
                .iter()
                .zip(&dir)
                .map(|(v, d)| v + t * d)
                .collect();
            let f = GridField::from_values_unchecked(*grid, vals);
            let e_t = truncated_energy(&f, rho_nodes, &coeffs);
            if e_t.is_finite()
                && (e_t <= e - 1e-4 * t * dir_norm_sq * hn + 1e-300
                    || config.step_rule == StepRule::Fixed)
            {
                next = f;
                e_next = e_t;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let new_grad = truncated_energy_gradient(&next, rho_nodes, &coeffs);
        if config.step_rule == StepRule::Backtracking {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..new_grad.len() {
                let s = next.values()[i] - u.values()[i];
                let y = (new_grad[i] - grad[i]) / hn;
                ss += s * s;
                sy += s * y;
            }
            step = if sy > 0.0 { (ss / sy).clamp(1e-9 * h * h, 1e6) } else { t * 2.0 };
        }
        let rel_dec = (e - e_next).abs() / e_next.abs().max(1e-300);
        u = next;
        e = e_next;
        grad = new_grad;
        let res_sup = grad.iter().fold(0.0f64, |m, &g| m.max((g / hn).abs()));
        let res_ok = config.residual_tolerance.map_or(true, |rt| res_sup < rt);
        if rel_dec < config.tolerance && res_ok {
            converged = true;
            break;
        }
    }
    let sup = sup_gradient_norm(&gradient(&u));
    Ok(TruncatedMinimizeResult {
        field: u,
        energy: e,
        iterations,
        sup_gradient_norm: sup,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charge::{sample_to_grid, RadialDensity};
    use crate::minimize;
    use crate::special::one_minus_sqrt_one_minus;
    use approx::assert_relative_eq;

    #[test]
    fn leading_coefficients_match_taylor_oracle() {
        let c = series_coefficients(8).unwrap();
        assert_relative_eq!(c.coefficients()[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(c.coefficients()[1], 0.125, max_relative = 1e-15);
        assert_relative_eq!(c.coefficients()[2], 1.0 / 16.0, max_relative = 1e-15);
        assert_relative_eq!(c.coefficients()[3], 5.0 / 128.0, max_relative = 1e-15);

        // Remainder oracle: 1-√(1-s) minus the partial sum must be
        // c_{k+1} s^{k+1} (1 + O(s)) at s = 1e-3.
        let s = 1e-3;
        for k in 1..=4 {
            let ck = series_coefficients(k).unwrap();
            let next = series_coefficients(k + 1).unwrap().coefficients()[k];
            let rem = one_minus_sqrt_one_minus(s) - ck.partial_sum(s);
            let expect = next * s.powi(k as i32 + 1);
            assert_relative_eq!(rem, expect, max_relative = 2e-3);
        }
    }

    #[test]
    fn partial_sums_increase_in_k_and_stay_sandwiched() {
        for &s in &[0.0, 0.1, 0.5, 0.9, 0.99] {
            let mut prev = 0.0;
            for k in 1..=24 {
                let c = series_coefficients(k).unwrap();
                let p = c.partial_sum(s);
                assert!(p >= prev, "positive terms: monotone in k");
                prev = p;
                let full = one_minus_sqrt_one_minus(s);
                assert!(p <= full + 1e-15, "partial sum below the function");
                if s < 1.0 {
                    let next = series_coefficients(k + 1).unwrap().coefficients()[k];
                    let tail_bound = next * s.powi(k as i32 + 1) / (1.0 - s);
                    assert!(
                        full <= p + tail_bound * (1.0 + 1e-12) + 1e-15,
                        "geometric tail bound: s={s} k={k}"
                    );
                }
            }
            assert_eq!(series_coefficients(5).unwrap().partial_sum(0.0), 0.0);
        }
    }

    fn grid3(n: usize) -> BoxGrid {
        BoxGrid::new(3, 1.2, n).unwrap()
    }

    fn bump_rho(grid: &BoxGrid, mass: f64) -> Vec<f64> {
        sample_to_grid(&RadialDensity::Bump { mass, radius: 0.45, dim: 3 }, grid).unwrap()
    }

    #[test]
    fn truncated_energy_zero_field_and_domination() {
        let grid = grid3(9);
        let rho = bump_rho(&grid, 1.0);
        let c = series_coefficients(4).unwrap();
        assert_eq!(truncated_energy(&GridField::zeros(grid), &rho, &c), 0.0);

        // For admissible u: I_k ≤ I and increases toward it with k.
        let u = GridField::from_fn(grid, |x| {
            0.3 * (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]) * (1.0 - x[2] * x[2])
        });
        let full = minimize::energy(&u, &rho).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in [1usize, 2, 4, 8, 16] {
            let ck = series_coefficients(k).unwrap();
            let ek = truncated_energy(&u, &rho, &ck);
            assert!(ek >= prev);
            prev = ek;
            assert!(ek <= full + 1e-12);
        }
    }

    #[test]
    fn order_one_is_the_poisson_energy() {
        let grid = grid3(9);
        let rho = bump_rho(&grid, 1.0);
        let c1 = series_coefficients(1).unwrap();
        let u = GridField::from_fn(grid, |x| {
            0.2 * (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]) * (1.0 - x[2] * x[2])
        });
        let want = {
            let ns = cell_gradient_norms_sq(&cell_gradients(&u), 3);
            let field: f64 = ns.iter().map(|s| 0.5 * s).sum::<f64>();
            let coupling: f64 =
                rho.iter().zip(u.values()).map(|(r, v)| r * v).sum::<f64>();
            (field - coupling) * grid.cell_volume()
        };
        assert_relative_eq!(truncated_energy(&u, &rho, &c1), want, max_relative = 1e-14);
    }

    #[test]
    fn xnorm_cases() {
        let grid = grid3(9);
        let zero = GridField::zeros(grid);
        let x = xnorm_2k(&zero, 3).unwrap();
        assert_eq!(x.grad_l2_sq, 0.0);
        assert_eq!(x.grad_l2k, 0.0);
        assert_eq!(x.combined_sq, 0.0);

        // |∇u|_{2k} approaches the sup norm as k grows, capped by the
        // volume factor |f|_p ≤ |f|_∞ V^{1/p}.
        let u = GridField::from_fn(grid, |x| {
            0.4 * (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]) * (1.0 - x[2] * x[2])
        });
        let sup = sup_gradient_norm(&gradient(&u));
        let vol = (2.0f64 * 1.2).powi(3);
        let mut prev = 0.0;
        let mut last_ratio = 0.0;
        for k in [1usize, 2, 4, 8, 16, 32, 64] {
            let n = xnorm_2k(&u, k).unwrap().grad_l2k;
            assert!(
                n <= sup * vol.powf(1.0 / (2.0 * k as f64)) * (1.0 + 1e-9),
                "k={k}: {n} vs cap"
            );
            last_ratio = n / sup;
            prev = prev.max(n);
        }
        assert!(prev > 0.0);
        assert!(
            (last_ratio - 1.0).abs() < 0.3,
            "L^128 should approach the sup: ratio {last_ratio}"
        );
    }

    #[test]
    fn zero_datum_minimizes_to_zero_field() {
        let grid = grid3(9);
        let rho = vec![0.0; grid.node_count()];
        let r = minimize_truncated(&rho, &grid, 4, &EnergyConfig::default()).unwrap();
        assert_eq!(r.energy, 0.0);
        assert!(r.field.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn order_one_minimizer_matches_direct_linear_solve() {
        let grid = grid3(17);
        let rho = bump_rho(&grid, 1.0);
        let cfg = EnergyConfig {
            tolerance: 1e-15,
            residual_tolerance: Some(1e-11),
            max_iterations: 50_000,
            ..Default::default()
        };
        let descent = minimize_truncated(&rho, &grid, 1, &cfg).unwrap();
        // k = 1 energy is ½⟨GᵀG u, u⟩ - ⟨ρ, u⟩: the minimizer solves
        // GᵀG u = ρ, which conjugate gradients solves independently.
        let direct = crate::poisson::solve_poisson(&grid, &rho, 1e-13).unwrap();
        let sup = descent
            .field
            .values()
            .iter()
            .zip(direct.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(sup < 1e-8, "descent vs CG sup distance {sup}");
    }

    #[test]
    fn truncated_minimizers_approach_the_constrained_one() {
        let grid = grid3(9);
        let rho = bump_rho(&grid, 2.5);
        let cfg = EnergyConfig {
            tolerance: 1e-14,
            residual_tolerance: Some(1e-10),
            max_iterations: 50_000,
            ..Default::default()
        };
        let full = minimize::minimize(&rho, &grid, &cfg).unwrap();
        let mut dists = Vec::new();
        let mut energies = Vec::new();
        for k in [1usize, 2, 4, 8, 16] {
            let r = minimize_truncated(&rho, &grid, k, &cfg).unwrap();
            let sup = r
                .field
                .values()
                .iter()
                .zip(full.field.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            dists.push(sup);
            energies.push(r.energy);
        }
        for w in dists.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "distances nonincreasing: {dists:?}");
        }
        assert!(dists.last().unwrap() < &dists[0]);
        // Truncated energy values decrease in k (richer families go lower).
        for w in energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "energies should decrease: {energies:?}");
        }
    }
}
