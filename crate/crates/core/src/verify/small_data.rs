//! The small-data threshold machinery: explicit constants bounding
//! `∫_{B_R} v⁻¹` from above (step one), `∫_{B_R} v^{γ+1}` from below (step
//! two), and the resulting pointwise lower bound on `v` at `R = 1` (step
//! three), which is positive when the datum norms are small enough.
//!
//! Embedding constants are explicit and recorded in the report: the sharp
//! Sobolev (Talenti) constant for the `m > 1` branch and an assembled
//! Morrey constant for `m = 1`.

use crate::special::{
    morrey_embedding_constant, sobolev_embedding_constant, unit_ball_volume,
};
use crate::verify::estimate::default_gamma;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SmallDataInput {
    pub dim: usize,
    /// Low exponent `m ∈ [1, 2N/(N+2)]`.
    pub m: f64,
    /// High exponent `q > 2N`.
    pub q: f64,
    pub rho_q: f64,
    pub rho_m: f64,
    /// `γ ∈ (0, 1/N)`; `None` uses the default `1/(2N)`.
    pub gamma: Option<f64>,
    /// Morrey exponent `s > N` for the `m = 1` branch; `None` uses `N + 1`.
    pub morrey_s: Option<f64>,
    /// Ball radius for the step-one/two constants (step three fixes `R=1`).
    pub radius: f64,
}

impl SmallDataInput {
    pub fn new(dim: usize, m: f64, q: f64, rho_q: f64, rho_m: f64) -> Self {
        Self { dim, m, q, rho_q, rho_m, gamma: None, morrey_s: None, radius: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallDataReport {
    pub dim: usize,
    pub m: f64,
    pub q: f64,
    pub gamma: f64,
    pub radius: f64,
    /// Upper bound for `∫_{B_R} v⁻¹`.
    pub c1: f64,
    /// Lower-bound constant: `∫_{B_R} v^{γ+1} ≥ c2 R^{N(γ+2)}`.
    pub c2: f64,
    /// The step-three lower bound for `v^γ(x₀)` at `R = 1`.
    pub step3_lower_bound: f64,
    /// `δ = (lower bound)^{1/γ}` when positive: the pointwise floor on `v`.
    pub v_bound: Option<f64>,
    /// `√(1 - δ²)`: the resulting cap on `|∇u|`.
    pub gradient_bound: Option<f64>,
    /// The embedding constant used (Talenti for m > 1, assembled chain for
    /// m = 1), recorded for auditability.
    pub embedding_constant: f64,
    pub morrey_constant: Option<f64>,
}

/// The shared bracket `ω_N R^N + 2^{…}(c |ρ|)^{…}` of steps one and two.
fn step_one_bracket(input: &SmallDataInput) -> Result<(f64, f64, Option<f64>)> {
    let n = input.dim as f64;
    let omega = unit_ball_volume(input.dim);
    let rn = omega * input.radius.powf(n);
    if (input.m - 1.0).abs() < 1e-12 {
        // m = 1 branch through the Morrey chain with s > N.
        let s = input.morrey_s.unwrap_or(n + 1.0);
        if s <= n {
            return Err(Error::InvalidParameter(format!("Morrey branch needs s > N, got {s}")));
        }
        let morrey = morrey_embedding_constant(input.dim, s);
        // c(N, s') with k = Ns/(N+s) (so k* = s).
        let k = n * s / (n + s);
        let sob = sobolev_embedding_constant(input.dim, k);
        let cbar = morrey * (sob + 1.0);
        let a = 2f64.powf(1.0 / (s - 1.0))
            * (cbar * input.rho_m).powf(s / (s - 1.0));
        Ok((rn + a, cbar, Some(morrey)))
    } else {
        let m = input.m;
        let two_star = 2.0 * n / (n + 2.0);
        if !(1.0 < m && m <= two_star + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "m = {m} outside (1, 2N/(N+2)]"
            )));
        }
        let k = m * n / ((n + 1.0) * m - n);
        let c_nm = sobolev_embedding_constant(input.dim, k);
        let m_star = n * m / (n - m);
        let a = 2f64.powf(((n + 1.0) * m - n) / (n - m))
            * (c_nm * input.rho_m).powf(m_star);
        Ok((rn + a, c_nm, None))
    }
}

/// Evaluate the explicit step constants and the step-three `v` floor.
pub fn small_data_report(input: &SmallDataInput) -> Result<SmallDataReport> {
    let n = input.dim as f64;
    if input.dim < 3 {
        return Err(Error::InvalidParameter("dimension must be ≥ 3".into()));
    }
    if input.q <= 2.0 * n {
        return Err(Error::InvalidParameter(format!(
            "q = {} must exceed 2N = {}",
            input.q,
            2.0 * n
        )));
    }
    if input.rho_q < 0.0 || input.rho_m < 0.0 {
        return Err(Error::InvalidParameter("norms must be nonnegative".into()));
    }
    let gamma = input.gamma.unwrap_or_else(|| default_gamma(input.dim));
    if !(gamma > 0.0 && gamma < 1.0 / n) {
        return Err(Error::InvalidParameter(format!("γ = {gamma} outside (0, 1/N)")));
    }
    let omega = unit_ball_volume(input.dim);
    let (c1, embedding_constant, morrey_constant) = step_one_bracket(input)?;
    let c2 = omega.powf(gamma + 2.0) / c1.powf(1.0 + gamma);

    // Step three at R = 1.
    let bracket_r1 = {
        let mut probe = *input;
        probe.radius = 1.0;
        step_one_bracket(&probe)?.0
    };
    let first = (-gamma / 4.0).exp() * omega.powf(gamma + 1.0) / bracket_r1.powf(1.0 + gamma);
    let beta = 2.0 * n / input.q;
    let c_rho = 2.25 * input.rho_q * input.rho_q;
    let second = 2f64.powf((input.q - 4.0) / 2.0)
        * c_rho
        * (omega.powf(-2.0 / input.q) / (1.0 - beta)
            + c_rho.powf((input.q - 2.0) / 2.0)
                * (2.0 / input.q).powf((input.q - 2.0) / 2.0)
                * omega.powf(-1.0)
                / ((1.0 - beta).powf((input.q - 2.0) / 2.0) * (input.q - n - 1.0)));
    let step3_lower_bound = first - second;
    let v_bound = if step3_lower_bound > 0.0 {
        Some(step3_lower_bound.powf(1.0 / gamma))
    } else {
        None
    };
    let gradient_bound = v_bound.map(|d| (1.0 - d * d).max(0.0).sqrt());

    Ok(SmallDataReport {
        dim: input.dim,
        m: input.m,
        q: input.q,
        gamma,
        radius: input.radius,
        c1,
        c2,
        step3_lower_bound,
        v_bound,
        gradient_bound,
        embedding_constant,
        morrey_constant,
    })
}

/// Bisection in a scalar multiplier on a fixed datum shape: the largest `t`
/// for which `t · (|ρ|_q, |ρ|_m)` still yields a positive step-three bound.
/// This is the empirical small-data threshold for that shape.
pub fn small_data_threshold(base: &SmallDataInput) -> Result<f64> {
    if base.rho_q <= 0.0 && base.rho_m <= 0.0 {
        return Err(Error::InvalidParameter(
            "threshold needs a nonzero datum shape".into(),
        ));
    }
    let bound_at = |t: f64| -> Result<f64> {
        let mut scaled = *base;
        scaled.rho_q = base.rho_q * t;
        scaled.rho_m = base.rho_m * t;
        Ok(small_data_report(&scaled)?.step3_lower_bound)
    };
    if bound_at(0.0)? <= 0.0 {
        return Err(Error::InvalidParameter(
            "even the zero datum fails: invalid exponents".into(),
        ));
    }
    let mut hi = 1.0;
    while bound_at(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidParameter(
                "no finite threshold found (bound never turns)".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bound_at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base(rho_q: f64, rho_m: f64) -> SmallDataInput {
        SmallDataInput::new(3, 1.2, 21.0, rho_q, rho_m)
    }

    #[test]
    fn zero_data_floor_is_exp_minus_quarter() {
        let rep = small_data_report(&base(0.0, 0.0)).unwrap();
        let v = rep.v_bound.expect("zero data must give a positive bound");
        assert!(
            (v - (-0.25f64).exp()).abs() < 1e-12,
            "v floor {v} vs e^(-1/4)"
        );
        assert!(rep.c1 > 0.0 && rep.c2 > 0.0);
        // At zero data c1 = ω_N R^N exactly.
        assert_relative_eq!(rep.c1, unit_ball_volume(3), max_relative = 1e-14);
    }

    #[test]
    fn bound_is_strictly_decreasing_in_each_norm() {
        let mut prev = f64::INFINITY;
        for i in 0..6 {
            let t = i as f64 * 0.05;
            let rep = small_data_report(&base(t, 0.01)).unwrap();
            assert!(rep.step3_lower_bound < prev);
            prev = rep.step3_lower_bound;
        }
        let mut prev = f64::INFINITY;
        for i in 0..6 {
            let t = i as f64 * 0.05;
            let rep = small_data_report(&base(0.01, t)).unwrap();
            assert!(rep.step3_lower_bound < prev);
            prev = rep.step3_lower_bound;
        }
    }

    #[test]
    fn threshold_bisection_finds_the_turning_point() {
        let shape = base(1.0, 0.7);
        let t = small_data_threshold(&shape).unwrap();
        assert!(t > 0.0, "threshold must be positive");
        let at = |scale: f64| {
            let mut s = shape;
            s.rho_q *= scale;
            s.rho_m *= scale;
            small_data_report(&s).unwrap().step3_lower_bound
        };
        assert!(at(t * 0.999) > 0.0);
        assert!(at(t * 1.001) <= 0.0);
    }

    #[test]
    fn m_equal_one_branch_works_and_reports_morrey() {
        let mut input = SmallDataInput::new(3, 1.0, 21.0, 0.01, 0.01);
        input.morrey_s = Some(4.0);
        let rep = small_data_report(&input).unwrap();
        assert!(rep.morrey_constant.is_some());
        assert!(rep.v_bound.is_some(), "small data must pass in the m=1 branch");
    }

    #[test]
    fn exponent_validation() {
        assert!(small_data_report(&SmallDataInput::new(3, 1.2, 5.0, 0.0, 0.0)).is_err());
        assert!(small_data_report(&SmallDataInput::new(3, 1.5, 21.0, 0.0, 0.0)).is_err());
        assert!(small_data_report(&SmallDataInput::new(2, 1.2, 21.0, 0.0, 0.0)).is_err());
    }
}
