//! Evaluation of the Lorentz-ball gradient estimate: at a strictly
//! spacelike solution with datum in `L^q`, `q > 2N`,
//!
//! `ω_N v^γ(x₀) ≥ e^{-γ/4} R^{-N} ∫_{K_R} v^{γ+1}
//!               - c(ρ) R (2/q)^{(q-2)/2} ∫_0^R s^{-β} [q/2 ω_N^{2/q} + c(ρ)/(1-β) s^{2-β}]^{(q-2)/2} ds
//!               + C R^{2-N} e^{-γ/4} ∫_{K_{R/2}} Σ u_ij²`
//!
//! with `β = 2N/q`, `c(ρ) = (9/4)|ρ|_q²`. The pair `(γ, C)` depends only on
//! `N` but is not exhibited; `γ` defaults to `1/(2N)` and `C` is calibrated
//! as the largest value keeping the margin nonnegative across a suite of
//! strictly spacelike exact solutions. Both are reported, never asserted as
//! universal.

use crate::grid::{
    cell_gradient_norms_sq, cell_gradients, lq_norm, BoxGrid, GridField,
};
use crate::radial::RadialProfile;
use crate::special::{unit_ball_volume, unit_sphere_area};
use crate::verify::lorentz::lorentz_ball_mask;
use crate::{quad, Error, Result};
use serde::{Deserialize, Serialize};

/// All evaluated quantities of the estimate at one `(x₀, R)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub center: Vec<f64>,
    pub radius: f64,
    pub gamma: f64,
    pub c_const: f64,
    pub beta: f64,
    pub c_rho: f64,
    pub term_lhs: f64,
    pub term_volume: f64,
    pub term_datum: f64,
    pub term_hessian: f64,
    /// `lhs - volume + datum - hessian`; the estimate asserts `margin ≥ 0`.
    pub margin: f64,
}

/// A radial exact solution together with the datum norm the estimate needs.
#[derive(Clone, Copy)]
pub struct RadialEstimateInput<'a> {
    pub profile: &'a RadialProfile,
    pub rho_q_norm: f64,
    pub q: f64,
}

/// Default `γ = 1/(2N)`, inside the mandated `(0, 1/N)`.
pub fn default_gamma(dim: usize) -> f64 {
    1.0 / (2.0 * dim as f64)
}

fn validate_exponents(dim: usize, q: f64, gamma: f64) -> Result<f64> {
    let n = dim as f64;
    if q <= 2.0 * n {
        return Err(Error::HypothesisViolated(format!(
            "estimate requires q > 2N (q = {q}, N = {dim})"
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0 / n) {
        return Err(Error::HypothesisViolated(format!(
            "γ = {gamma} outside (0, 1/N)"
        )));
    }
    Ok(2.0 * n / q)
}

/// The explicit datum term
/// `c(ρ) R (2/q)^{(q-2)/2} ∫_0^R s^{-β}[q/2 ω_N^{2/q} + c(ρ)/(1-β) s^{2-β}]^{(q-2)/2} ds`,
/// with the endpoint singularity handled exactly.
pub fn datum_term(dim: usize, q: f64, rho_q_norm: f64, radius: f64) -> Result<f64> {
    let n = dim as f64;
    let beta = 2.0 * n / q;
    let c_rho = 2.25 * rho_q_norm * rho_q_norm;
    if c_rho == 0.0 {
        return Ok(0.0);
    }
    let omega = unit_ball_volume(dim);
    let expo = (q - 2.0) / 2.0;
    let integral = quad::integrate_power_singular(
        |s| {
            (q / 2.0 * omega.powf(2.0 / q) + c_rho / (1.0 - beta) * s.powf(2.0 - beta))
                .powf(expo)
        },
        beta,
        radius,
        1e-11,
    )?;
    Ok(c_rho * radius * (2.0 / q).powf(expo) * integral)
}

/// `∫_{K_R(x₀)} f(|x|) dx` for a radial profile, by star-shaped quadrature:
/// the Lorentz ball is star-shaped around `x₀` and axisymmetric about the
/// `x₀` direction, so the integral reduces to a polar angle times a radial
/// ray integral up to the boundary `t*(θ)` where `l = R`.
pub fn lorentz_region_integral<F: Fn(f64) -> f64>(
    profile: &RadialProfile,
    center_distance: f64,
    radius: f64,
    f: F,
) -> Result<f64> {
    let dim = profile.dim();
    let n = dim as f64;
    let v_min = profile.min_v();
    if v_min < 1e-6 {
        return Err(Error::HypothesisViolated(
            "profile is not strictly spacelike".into(),
        ));
    }
    let u0 = profile.potential_at(center_distance);
    let t_hi_global = radius / v_min * (1.0 + 1e-9);

    // l(t)² along the ray at polar angle θ from the x₀ direction.
    let l_sq = |t: f64, cos_theta: f64| -> f64 {
        let r = (center_distance * center_distance
            + t * t
            + 2.0 * center_distance * t * cos_theta)
            .max(0.0)
            .sqrt();
        let du = profile.potential_at(r) - u0;
        t * t - du * du
    };
    let t_star = |cos_theta: f64| -> f64 {
        let target = radius * radius;
        let mut lo = radius * (1.0 - 1e-15);
        let mut hi = t_hi_global;
        if l_sq(lo, cos_theta) >= target {
            return radius;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if l_sq(mid, cos_theta) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    };

    // Composite Gauss-Legendre in θ over [0, π], adaptive rays.
    let pts = crate::charge::polar_nodes();
    let panels = 8usize;
    let mut acc = 0.0;
    for p in 0..panels {
        let a = std::f64::consts::PI * p as f64 / panels as f64;
        let b = std::f64::consts::PI * (p + 1) as f64 / panels as f64;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for &(x, w) in pts {
            let theta = mid + half * x;
            let (sin_t, cos_t) = theta.sin_cos();
            let upper = t_star(cos_t);
            let ray = quad::integrate(
                |t| {
                    let r = (center_distance * center_distance
                        + t * t
                        + 2.0 * center_distance * t * cos_t)
                        .max(0.0)
                        .sqrt();
                    f(r) * t.powf(n - 1.0)
                },
                0.0,
                upper,
                1e-11,
            )?;
            acc += w * half * sin_t.powi(dim as i32 - 2) * ray;
        }
    }
    Ok(acc * unit_sphere_area(dim - 1))
}

/// Evaluate the estimate at a radial exact solution.
pub fn evaluate_estimate_radial(
    input: &RadialEstimateInput,
    center_distance: f64,
    radius: f64,
    gamma: f64,
    c_const: f64,
) -> Result<EstimateReport> {
    let profile = input.profile;
    let dim = profile.dim();
    let n = dim as f64;
    let beta = validate_exponents(dim, input.q, gamma)?;
    if profile.min_v() < 1e-3 {
        return Err(Error::HypothesisViolated(format!(
            "not strictly spacelike: min v = {}",
            profile.min_v()
        )));
    }
    let omega = unit_ball_volume(dim);
    let decay = (-gamma / 4.0).exp();

    let term_lhs = omega * profile.v_at(center_distance).powf(gamma);
    let vol_integral = lorentz_region_integral(profile, center_distance, radius, |r| {
        profile.v_at(r).powf(gamma + 1.0)
    })?;
    let term_volume = decay * radius.powf(-n) * vol_integral;
    let term_datum = datum_term(dim, input.q, input.rho_q_norm, radius)?;
    let hess_integral =
        lorentz_region_integral(profile, center_distance, radius / 2.0, |r| {
            profile.hessian_frob_sq_at(r)
        })?;
    let term_hessian = c_const * radius.powf(2.0 - n) * decay * hess_integral;

    let c_rho = 2.25 * input.rho_q_norm * input.rho_q_norm;
    Ok(EstimateReport {
        center: center_vec(dim, center_distance),
        radius,
        gamma,
        c_const,
        beta,
        c_rho,
        term_lhs,
        term_volume,
        term_datum,
        term_hessian,
        margin: term_lhs - term_volume + term_datum - term_hessian,
    })
}

fn center_vec(dim: usize, distance: f64) -> Vec<f64> {
    let mut c = vec![0.0; dim];
    c[0] = distance;
    c
}

/// Evaluate the estimate on a grid field (cell masks and central second
/// differences; discretization-biased, preferred only when no radial form
/// exists).
pub fn evaluate_estimate_grid(
    u: &GridField,
    rho_values: &[f64],
    q: f64,
    x0: &[f64],
    radius: f64,
    gamma: f64,
    c_const: f64,
) -> Result<EstimateReport> {
    let grid = u.grid();
    let dim = grid.dim();
    let n = dim as f64;
    let beta = validate_exponents(dim, q, gamma)?;
    let h = grid.spacing();

    let grads = cell_gradients(u);
    let norms_sq = cell_gradient_norms_sq(&grads, dim);
    let v_cells: Vec<f64> = norms_sq.iter().map(|&s| (1.0 - s).max(0.0).sqrt()).collect();

    // v at x₀: the value of the containing cell.
    let mut cell_of_x0 = 0usize;
    {
        let strides = grid.cell_strides();
        for i in 0..dim {
            let t = ((x0[i] + grid.extent()) / h - 0.5)
                .clamp(0.0, (grid.cells_per_axis() - 1) as f64);
            cell_of_x0 += (t.round() as usize).min(grid.cells_per_axis() - 1) * strides[i];
        }
    }
    let v0 = v_cells[cell_of_x0];
    let sup_norm_sq = norms_sq.iter().fold(0.0f64, |m, &s| m.max(s));
    let v_min = (1.0 - sup_norm_sq).max(0.0).sqrt();
    if v_min < 1e-3 {
        return Err(Error::HypothesisViolated(format!(
            "not strictly spacelike on the grid: min v = {v_min}"
        )));
    }
    // The Lorentz ball sits inside the stretched Euclidean ball; require it
    // inside the box with stencil room.
    let reach = radius / v_min;
    for i in 0..dim {
        if x0[i].abs() + reach > grid.extent() - 2.0 * h {
            return Err(Error::OutOfDomain(format!(
                "K_R(x₀) may exceed the box: reach {reach}"
            )));
        }
    }

    let omega = unit_ball_volume(dim);
    let decay = (-gamma / 4.0).exp();
    let term_lhs = omega * v0.powf(gamma);

    let mask = lorentz_ball_mask(u, x0, radius)?;
    let hn = grid.cell_volume();
    let mut vol_integral = 0.0;
    for (cell, &inside) in mask.iter().enumerate() {
        if inside {
            vol_integral += v_cells[cell].powf(gamma + 1.0) * hn;
        }
    }
    let term_volume = decay * radius.powf(-n) * vol_integral;

    let rho_q = lq_norm(rho_values, grid, q)?;
    let term_datum = datum_term(dim, q, rho_q, radius)?;

    // Hessian integral over K_{R/2} at interior nodes.
    let strides = grid.node_strides();
    let values = u.values();
    let u0 = u.interpolate(x0);
    let mut coords = vec![0usize; dim];
    let mut pos = vec![0.0f64; dim];
    let mut hess_integral = 0.0;
    for idx in 0..grid.node_count() {
        grid.node_coords(idx, &mut coords);
        if coords
            .iter()
            .any(|&c| c < 2 || c > grid.points_per_axis() - 3)
        {
            continue;
        }
        grid.node_position(&coords, &mut pos);
        let dist_sq: f64 = pos.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
        let du = values[idx] - u0;
        let l_sq = dist_sq - du * du;
        if l_sq >= radius * radius / 4.0 {
            continue;
        }
        let mut frob = 0.0;
        for i in 0..dim {
            let si = strides[i];
            let dii = (values[idx + si] - 2.0 * values[idx] + values[idx - si]) / (h * h);
            frob += dii * dii;
            for j in (i + 1)..dim {
                let sj = strides[j];
                let dij = (values[idx + si + sj] - values[idx + si - sj]
                    - values[idx - si + sj]
                    + values[idx - si - sj])
                    / (4.0 * h * h);
                frob += 2.0 * dij * dij;
            }
        }
        hess_integral += frob * hn;
    }
    let term_hessian = c_const * radius.powf(2.0 - n) * decay * hess_integral;

    let c_rho = 2.25 * rho_q * rho_q;
    Ok(EstimateReport {
        center: x0.to_vec(),
        radius,
        gamma,
        c_const,
        beta,
        c_rho,
        term_lhs,
        term_volume,
        term_datum,
        term_hessian,
        margin: term_lhs - term_volume + term_datum - term_hessian,
    })
}

/// Result of calibrating the Hessian-term constant over a suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Calibration {
    pub gamma: f64,
    /// `0.999 ×` the binding ratio: the largest constant keeping every
    /// sampled margin nonnegative, with a hair of slack for roundoff.
    pub c_const: f64,
    pub binding_ratio: f64,
    pub samples: usize,
}

/// Find the largest `C` with nonnegative margin across all profiles and
/// `(x₀, R)` samples: `C* = min (lhs - vol + datum)/hessian_factor`.
/// Fails if some sample is infeasible for every `C` (negative numerator).
pub fn calibrate_hessian_constant(
    inputs: &[RadialEstimateInput],
    samples: &[(f64, f64)],
    gamma: f64,
) -> Result<Calibration> {
    let mut best = f64::INFINITY;
    let mut count = 0usize;
    for input in inputs {
        for &(d, radius) in samples {
            let base = evaluate_estimate_radial(input, d, radius, gamma, 0.0)?;
            let with_unit = evaluate_estimate_radial(input, d, radius, gamma, 1.0)?;
            let hess_unit = with_unit.term_hessian;
            let numerator = base.margin; // lhs - vol + datum
            count += 1;
            if numerator < 0.0 {
                return Err(Error::HypothesisViolated(format!(
                    "calibration infeasible at (x₀ = {d}, R = {radius}): \
                     constant-free margin {numerator}"
                )));
            }
            if hess_unit > 1e-300 {
                best = best.min(numerator / hess_unit);
            }
        }
    }
    if !best.is_finite() {
        // No sample had a nonzero Hessian term; any constant works.
        best = 1.0;
    }
    Ok(Calibration { gamma, c_const: 0.999 * best, binding_ratio: best, samples: count })
}
