//! The scaling identities: with `w̃(x) = t w(x/t)` and `ρ̃(x) = t⁻¹ρ(x/t)`,
//! the datum norms obey `|ρ̃|_q^q = t^{N-q} |ρ|_q^q` and the energies
//! `I_ρ̃(w̃) = t^N I_ρ(w)`. On matched grids (same index lattice, scaled
//! extent) both identities hold to roundoff, which is what the check
//! reports.

use crate::charge::{PowerDatum, RadialDensity, Taper};
use crate::grid::{lq_norm, BoxGrid, GridField};
use crate::minimize::energy;
use crate::special::unit_sphere_area;
use crate::{charge, Error, Result};
use serde::{Deserialize, Serialize};

/// `ρ̃(x) = t⁻¹ ρ(x/t)` realized family-by-family.
pub fn scaled_density(density: &RadialDensity, t: f64) -> Result<RadialDensity> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("scale t = {t} must be positive")));
    }
    Ok(match *density {
        RadialDensity::Zero => RadialDensity::Zero,
        RadialDensity::Power(PowerDatum { amplitude, exponent, cutoff, taper }) => {
            RadialDensity::Power(PowerDatum {
                amplitude: amplitude * t.powf(exponent),
                exponent,
                cutoff: cutoff * t,
                taper,
            })
        }
        RadialDensity::SmoothedPower { amplitude, exponent, core, cutoff, taper } => {
            RadialDensity::SmoothedPower {
                amplitude: amplitude * t.powf(exponent),
                exponent,
                core: core * t,
                cutoff: cutoff * t,
                taper,
            }
        }
        RadialDensity::Bump { mass, radius, dim } => RadialDensity::Bump {
            mass: mass * t.powi(dim as i32 - 1),
            radius: radius * t,
            dim,
        },
        RadialDensity::Constant { value, cutoff, taper } => {
            RadialDensity::Constant { value: value / t, cutoff: cutoff * t, taper }
        }
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub t: f64,
    pub q: f64,
    /// `|ρ̃|_q^q / |ρ|_q^q` measured discretely, and the exact `t^{N-q}`.
    pub norm_power_ratio: f64,
    pub norm_power_ratio_expected: f64,
    pub norm_defect: f64,
    /// `I_ρ̃(w̃) / I_ρ(w)` measured discretely, and the exact `t^N`.
    pub energy_ratio: f64,
    pub energy_ratio_expected: f64,
    pub energy_defect: f64,
    /// Analytic norm-power ratio for closed-form families, when available.
    pub analytic_norm_ratio: Option<f64>,
}

/// Build the scaled pair on the scaled grid and report both identity
/// defects (relative).
pub fn scaling_check(
    density: &RadialDensity,
    w: &GridField,
    t: f64,
    q: f64,
) -> Result<ScalingReport> {
    let grid = *w.grid();
    let dim = grid.dim();
    let n = dim as f64;
    let scaled_grid = BoxGrid::new(dim, grid.extent() * t, grid.points_per_axis())?;
    let scaled = scaled_density(density, t)?;

    let rho = charge::sample_to_grid(density, &grid)?;
    let rho_scaled = charge::sample_to_grid(&scaled, &scaled_grid)?;

    // w̃ has the same nodal array times t on the scaled lattice.
    let w_scaled = GridField::from_values(
        scaled_grid,
        w.values().iter().map(|v| t * v).collect(),
    )?;

    let norm_base = lq_norm(&rho, &grid, q)?.powf(q);
    let norm_scaled = lq_norm(&rho_scaled, &scaled_grid, q)?.powf(q);
    let norm_power_ratio = norm_scaled / norm_base;
    let norm_power_ratio_expected = t.powf(n - q);
    let norm_defect =
        (norm_power_ratio - norm_power_ratio_expected).abs() / norm_power_ratio_expected;

    let e_base = energy(w, &rho)?;
    let e_scaled = energy(&w_scaled, &rho_scaled)?;
    let energy_ratio = e_scaled / e_base;
    let energy_ratio_expected = t.powf(n);
    let energy_defect =
        (energy_ratio - energy_ratio_expected).abs() / energy_ratio_expected;

    // Closed form for the hard-cutoff power family:
    // |ρ|_q^q = C^q S_{N-1} r0^{N-q(1+β)}/(N-q(1+β)).
    let analytic_norm_ratio = match (density, &scaled) {
        (
            RadialDensity::Power(PowerDatum {
                amplitude: c1, exponent: b1, cutoff: r1, taper: Taper::Hard,
            }),
            RadialDensity::Power(PowerDatum {
                amplitude: c2, exponent: b2, cutoff: r2, taper: Taper::Hard,
            }),
        ) => {
            let p1 = q * (1.0 + b1);
            if p1 < n {
                let s = unit_sphere_area(dim);
                let norm1 = c1.abs().powf(q) * s * r1.powf(n - p1) / (n - p1);
                let p2 = q * (1.0 + b2);
                let norm2 = c2.abs().powf(q) * s * r2.powf(n - p2) / (n - p2);
                Some(norm2 / norm1)
            } else {
                None
            }
        }
        _ => None,
    };

    Ok(ScalingReport {
        t,
        q,
        norm_power_ratio,
        norm_power_ratio_expected,
        norm_defect,
        energy_ratio,
        energy_ratio_expected,
        energy_defect,
        analytic_norm_ratio,
    })
}
