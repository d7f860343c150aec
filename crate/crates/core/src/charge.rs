//! Charge-density data: analytic radial families, grid-sampled densities,
//! mollification by the standard compactly supported kernel, and the linear
//! Riesz / truncated Wolff potentials of a density.

use crate::grid::{lq_norm, BoxGrid};
use crate::special::{
    bump_normalization, bump_profile, smoothstep_quintic, unit_ball_volume, unit_sphere_area,
};
use crate::{quad, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Outer truncation of a radial profile at its cutoff radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Taper {
    /// Zero outside the cutoff radius.
    Hard,
    /// Multiply by a C² ramp from 1 down to 0 on `[fraction·r0, r0]`.
    Smooth { fraction: f64 },
}

/// Power-law radial datum `ρ(r) = C r^{-1-β}` supported in `B(0, r0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerDatum {
    pub amplitude: f64,
    pub exponent: f64,
    pub cutoff: f64,
    pub taper: Taper,
}

impl PowerDatum {
    pub fn new(amplitude: f64, exponent: f64, cutoff: f64, dim: usize) -> Result<Self> {
        if !(cutoff > 0.0) {
            return Err(Error::InvalidParameter(format!("cutoff {cutoff} must be positive")));
        }
        if exponent >= dim as f64 - 1.0 {
            return Err(Error::InvalidParameter(format!(
                "exponent β = {exponent} ≥ N-1: the flux integral diverges at the origin"
            )));
        }
        Ok(Self { amplitude, exponent, cutoff, taper: Taper::Hard })
    }

    pub fn with_taper(mut self, taper: Taper) -> Self {
        self.taper = taper;
        self
    }
}

/// An analytic radial density profile `r ↦ ρ(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RadialDensity {
    Zero,
    /// `C r^{-1-β}` inside the cutoff.
    Power(PowerDatum),
    /// `C (r² + core²)^{-(1+β)/2}` inside the cutoff: the power datum with
    /// its origin singularity smoothed on scale `core`. C¹ on all of `R^N`
    /// once combined with a smooth taper.
    SmoothedPower { amplitude: f64, exponent: f64, core: f64, cutoff: f64, taper: Taper },
    /// A point charge mollified on scale `radius`: `mass · φ_radius(x)` with
    /// the standard normalized bump kernel.
    Bump { mass: f64, radius: f64, dim: usize },
    /// Constant value on `B(0, r0)`.
    Constant { value: f64, cutoff: f64, taper: Taper },
}

fn taper_factor(taper: Taper, r: f64, cutoff: f64) -> f64 {
    if r >= cutoff {
        return 0.0;
    }
    match taper {
        Taper::Hard => 1.0,
        Taper::Smooth { fraction } => {
            let start = fraction * cutoff;
            if r <= start {
                1.0
            } else {
                1.0 - smoothstep_quintic((r - start) / (cutoff - start))
            }
        }
    }
}

impl RadialDensity {
    /// Pointwise value `ρ(r)`; infinite at a genuinely singular origin.
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            RadialDensity::Zero => 0.0,
            RadialDensity::Power(PowerDatum { amplitude, exponent, cutoff, taper }) => {
                if r >= cutoff {
                    0.0
                } else {
                    amplitude * r.powf(-1.0 - exponent) * taper_factor(taper, r, cutoff)
                }
            }
            RadialDensity::SmoothedPower { amplitude, exponent, core, cutoff, taper } => {
                if r >= cutoff {
                    0.0
                } else {
                    amplitude
                        * (r * r + core * core).powf(-(1.0 + exponent) / 2.0)
                        * taper_factor(taper, r, cutoff)
                }
            }
            RadialDensity::Bump { mass, radius, dim } => {
                mass * bump_normalization(dim) / radius.powi(dim as i32)
                    * bump_profile(r / radius)
            }
            RadialDensity::Constant { value, cutoff, taper } => {
                if r >= cutoff {
                    0.0
                } else {
                    value * taper_factor(taper, r, cutoff)
                }
            }
        }
    }

    /// Radius outside which the profile vanishes.
    pub fn support_radius(&self) -> f64 {
        match *self {
            RadialDensity::Zero => 0.0,
            RadialDensity::Power(PowerDatum { cutoff, .. }) => cutoff,
            RadialDensity::SmoothedPower { cutoff, .. } => cutoff,
            RadialDensity::Bump { radius, .. } => radius,
            RadialDensity::Constant { cutoff, .. } => cutoff,
        }
    }

    /// True when `ρ(r) → ∞` as `r → 0`.
    pub fn singular_at_origin(&self) -> bool {
        matches!(
            *self,
            RadialDensity::Power(PowerDatum { exponent, .. }) if exponent > -1.0
        )
    }

    /// Flux `F(r) = ∫_0^r s^{N-1} ρ(s) ds`, the radial antiderivative of the
    /// divergence. Closed form for untapped power data, adaptive quadrature
    /// otherwise; relative tolerance 1e-10.
    pub fn flux(&self, dim: usize, r: f64) -> Result<f64> {
        let n = dim as f64;
        if r <= 0.0 {
            return Ok(0.0);
        }
        match *self {
            RadialDensity::Zero => Ok(0.0),
            RadialDensity::Power(PowerDatum { amplitude, exponent, cutoff, taper: Taper::Hard }) => {
                let rr = r.min(cutoff);
                // ∫_0^r s^{N-2-β} ds = r^{N-1-β}/(N-1-β), needs β < N-1.
                Ok(amplitude * rr.powf(n - 1.0 - exponent) / (n - 1.0 - exponent))
            }
            RadialDensity::Power(PowerDatum { amplitude, exponent, cutoff, taper }) => {
                let rr = r.min(cutoff);
                let start = match taper {
                    Taper::Smooth { fraction } => fraction * cutoff,
                    Taper::Hard => unreachable!(),
                };
                let plain = amplitude * rr.min(start).powf(n - 1.0 - exponent)
                    / (n - 1.0 - exponent);
                if rr <= start {
                    Ok(plain)
                } else {
                    let tapered = quad::integrate(
                        |s| s.powf(n - 1.0) * self.value(s),
                        start,
                        rr,
                        1e-11,
                    )?;
                    Ok(plain + tapered)
                }
            }
            RadialDensity::Bump { mass, radius, dim: kdim } => {
                debug_assert_eq!(kdim, dim, "bump dimension must match");
                let rr = (r / radius).min(1.0);
                let a = bump_normalization(dim);
                let frac = quad::integrate(
                    |s| a * unit_sphere_area(dim) * s.powf(n - 1.0) * bump_profile(s),
                    0.0,
                    rr,
                    1e-12,
                )?;
                Ok(mass * frac / unit_sphere_area(dim))
            }
            RadialDensity::Constant { value, cutoff, taper: Taper::Hard } => {
                let rr = r.min(cutoff);
                Ok(value * rr.powf(n) / n)
            }
            _ => quad::integrate(|s| s.powf(n - 1.0) * self.value(s), 0.0, r, 1e-11),
        }
    }

    /// Total mass `∫ ρ = S_{N-1} F(∞)`.
    pub fn total_mass(&self, dim: usize) -> Result<f64> {
        Ok(unit_sphere_area(dim) * self.flux(dim, self.support_radius().max(1e-300))?)
    }

    /// `|ρ|_{L^q(R^N)}`; closed form for hard-cutoff power data (with the
    /// exact divergence criterion `q(1+β) ≥ N`), quadrature otherwise.
    pub fn lq_norm(&self, dim: usize, q: f64) -> Result<f64> {
        let n = dim as f64;
        if q < 1.0 {
            return Err(Error::InvalidParameter(format!("L^q norm needs q ≥ 1, got {q}")));
        }
        match *self {
            RadialDensity::Zero => Ok(0.0),
            RadialDensity::Power(PowerDatum { amplitude, exponent, cutoff, taper }) => {
                let p = q * (1.0 + exponent);
                if p >= n {
                    return Err(Error::DivergentIntegral(format!(
                        "|ρ|_{q} of r^(-1-{exponent}) diverges at the origin (q(1+β) = {p} ≥ N)"
                    )));
                }
                match taper {
                    Taper::Hard => {
                        let integral = amplitude.abs().powf(q) * unit_sphere_area(dim)
                            * cutoff.powf(n - p)
                            / (n - p);
                        Ok(integral.powf(1.0 / q))
                    }
                    Taper::Smooth { .. } => {
                        // Exact in the singular factor s^{-p+N-1}.
                        let beta_eff = p - (n - 1.0);
                        let integral = unit_sphere_area(dim)
                            * quad::integrate_power_singular(
                                |s| {
                                    let t = taper_factor(taper, s, cutoff);
                                    amplitude.abs().powf(q) * t.powf(q)
                                },
                                beta_eff,
                                cutoff,
                                1e-11,
                            )?;
                        Ok(integral.powf(1.0 / q))
                    }
                }
            }
            _ => {
                let r_max = self.support_radius();
                let integral = unit_sphere_area(dim)
                    * quad::integrate(
                        |s| s.powf(n - 1.0) * self.value(s).abs().powf(q),
                        0.0,
                        r_max,
                        1e-11,
                    )?;
                Ok(integral.powf(1.0 / q))
            }
        }
    }
}

/// A charge datum: analytic-radial, grid-sampled, or a mollification of
/// another datum, with a cache of computed `L^q` norms.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeDensity {
    kind: ChargeKind,
    dim: usize,
    cached_norms: BTreeMap<u64, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChargeKind {
    AnalyticRadial(RadialDensity),
    GridSampled { grid: BoxGrid, values: Vec<f64> },
    Mollified { base: Box<ChargeDensity>, scale: f64, grid: BoxGrid, values: Vec<f64> },
}

impl ChargeDensity {
    pub fn radial(density: RadialDensity, dim: usize) -> Self {
        Self { kind: ChargeKind::AnalyticRadial(density), dim, cached_norms: BTreeMap::new() }
    }

    pub fn grid_sampled(grid: BoxGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidGrid(format!(
                "density has {} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(Self {
            dim: grid.dim(),
            kind: ChargeKind::GridSampled { grid, values },
            cached_norms: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ChargeKind {
        &self.kind
    }

    pub fn as_radial(&self) -> Option<&RadialDensity> {
        match &self.kind {
            ChargeKind::AnalyticRadial(d) => Some(d),
            _ => None,
        }
    }

    /// Nodal values on `grid` (sampling analytic data as node-centered cell
    /// averages when necessary).
    pub fn grid_values(&self, grid: &BoxGrid) -> Result<Vec<f64>> {
        match &self.kind {
            ChargeKind::AnalyticRadial(d) => sample_to_grid(d, grid),
            ChargeKind::GridSampled { grid: g, values }
            | ChargeKind::Mollified { grid: g, values, .. } => {
                if g == grid {
                    Ok(values.clone())
                } else {
                    Err(Error::InvalidGrid(
                        "sampled density lives on a different grid".into(),
                    ))
                }
            }
        }
    }

    /// `|ρ|_q`: analytic when available, discrete `L^q` norm of the sampled
    /// values otherwise.
    pub fn lq(&self, q: f64) -> Result<f64> {
        if let Some(&v) = self.cached_norms.get(&q.to_bits()) {
            return Ok(v);
        }
        match &self.kind {
            ChargeKind::AnalyticRadial(d) => d.lq_norm(self.dim, q),
            ChargeKind::GridSampled { grid, values }
            | ChargeKind::Mollified { grid, values, .. } => lq_norm(values, grid, q),
        }
    }

    /// Precompute and cache norms for the given exponents.
    pub fn with_cached_norms(mut self, qs: &[f64]) -> Result<Self> {
        for &q in qs {
            let v = self.lq(q)?;
            if v < 0.0 {
                return Err(Error::InvalidParameter("negative cached norm".into()));
            }
            self.cached_norms.insert(q.to_bits(), v);
        }
        Ok(self)
    }

    pub fn cached_norm(&self, q: f64) -> Option<f64> {
        self.cached_norms.get(&q.to_bits()).copied()
    }
}

/// `∫_{S^{N-1}} max_i |σ_i|^{-p} dσ`, reduced by the gnomonic projection of
/// each face region to a flat `[−1,1]^{N-1}` integral of
/// `(1+|y|²)^{(p-N)/2}`. Used for exact cell integrals of power data.
fn sphere_max_coord_moment(dim: usize, p: f64) -> f64 {
    let pts = gauss_legendre_32();
    let m = dim - 1;
    let expo = (p - dim as f64) / 2.0;
    // Tensor product over [-1,1]^(N-1).
    let mut total = 0.0;
    let count = pts.len().pow(m as u32);
    let mut idx = vec![0usize; m];
    for flat in 0..count {
        let mut rem = flat;
        for slot in idx.iter_mut().rev() {
            *slot = rem % pts.len();
            rem /= pts.len();
        }
        let mut w = 1.0;
        let mut norm_sq = 0.0;
        for &k in &idx {
            let (x, wx) = pts[k];
            w *= wx;
            norm_sq += x * x;
        }
        total += w * (1.0 + norm_sq).powf(expo);
    }
    2.0 * dim as f64 * total
}

/// The 32-point Gauss-Legendre rule on [-1, 1], shared by the polar
/// quadratures elsewhere in the crate.
pub(crate) fn polar_nodes() -> &'static [(f64, f64)] {
    gauss_legendre_32()
}

fn gauss_legendre_32() -> &'static [(f64, f64)] {
    // 16 nonnegative nodes of the 32-point rule, mirrored.
    const HALF: [(f64, f64); 16] = [
        (0.0483076656877383162348126, 0.0965400885147278005667648),
        (0.1444719615827964934851864, 0.0956387200792748594190820),
        (0.2392873622521370745446032, 0.0938443990808045656391802),
        (0.3318686022821276497799168, 0.0911738786957638847128686),
        (0.4213512761306353453641194, 0.0876520930044038111427715),
        (0.5068999089322293900237475, 0.0833119242269467552221991),
        (0.5877157572407623290407455, 0.0781938957870703064717409),
        (0.6630442669302152009751152, 0.0723457941088485062253994),
        (0.7321821187402896803874267, 0.0658222227763618468376501),
        (0.7944837959679424069630973, 0.0586840934785355471452836),
        (0.8493676137325699701336930, 0.0509980592623761761961632),
        (0.8963211557660521239653072, 0.0428358980222266806568786),
        (0.9349060759377396891709191, 0.0342738629130214331026877),
        (0.9647622555875064307738119, 0.0253920653092620594557526),
        (0.9856115115452683354001750, 0.0162743947309056706051706),
        (0.9972638618494815635449811, 0.0070186100094700966004071),
    ];
    use std::sync::OnceLock;
    static FULL: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    FULL.get_or_init(|| {
        let mut v = Vec::with_capacity(32);
        for &(x, w) in HALF.iter() {
            v.push((-x, w));
            v.push((x, w));
        }
        v
    })
}

/// Node-centered cell averages of an analytic radial density.
///
/// The node whose cell contains the origin gets the exact analytic cell
/// integral (power data only need it; smooth families are handled by the
/// tensor rule). Errors if the profile is not integrable at the origin.
pub fn sample_to_grid(density: &RadialDensity, grid: &BoxGrid) -> Result<Vec<f64>> {
    let dim = grid.dim();
    let n = dim as f64;
    if let RadialDensity::Power(PowerDatum { exponent, .. }) = density {
        if *exponent >= n - 1.0 {
            return Err(Error::DivergentIntegral(
                "power datum not integrable at the origin".into(),
            ));
        }
    }
    if let RadialDensity::Bump { dim: kdim, .. } = density {
        if *kdim != dim {
            return Err(Error::InvalidParameter("bump dimension mismatch".into()));
        }
    }
    let h = grid.spacing();
    let half = h / 2.0;
    // 3-point Gauss per axis for the regular cells.
    let gl: [(f64, f64); 3] = {
        let x = (3.0f64 / 5.0).sqrt();
        [(-x, 5.0 / 18.0), (0.0, 8.0 / 18.0), (x, 5.0 / 18.0)]
    };
    let origin_cell_value = match density {
        RadialDensity::Power(PowerDatum { amplitude, exponent, .. }) => {
            let p = n - 1.0 - exponent;
            let moment = sphere_max_coord_moment(dim, p);
            // ∫_cell C r^{-1-β} dx = C (h/2)^{N-1-β}/(N-1-β) · moment
            Some(amplitude * half.powf(p) / p * moment / grid.cell_volume())
        }
        _ => None,
    };

    let mut out = vec![0.0f64; grid.node_count()];
    out.par_iter_mut().enumerate().for_each(|(idx, slot)| {
        let mut coords = vec![0usize; dim];
        let mut pos = vec![0.0f64; dim];
        grid.node_coords(idx, &mut coords);
        grid.node_position(&coords, &mut pos);
        let at_origin = pos.iter().all(|&c| c.abs() < half * 1e-9);
        if at_origin {
            if let Some(v) = origin_cell_value {
                *slot = v;
                return;
            }
        }
        // Tensor Gauss average over the node-centered cell.
        let mut acc = 0.0;
        let levels = gl.len().pow(dim as u32);
        let mut digits = vec![0usize; dim];
        for flat in 0..levels {
            let mut rem = flat;
            for d in digits.iter_mut().rev() {
                *d = rem % gl.len();
                rem /= gl.len();
            }
            let mut w = 1.0;
            let mut r_sq = 0.0;
            for i in 0..dim {
                let (x, wx) = gl[digits[i]];
                w *= wx;
                let c = pos[i] + half * x;
                r_sq += c * c;
            }
            acc += w * density.value(r_sq.sqrt());
        }
        *slot = acc;
    });
    Ok(out)
}

/// Convolve grid values with the standard bump kernel of radius `1/n`,
/// discretely normalized to unit mass (so constants are preserved exactly
/// and compactly supported charge away from the boundary keeps its total).
pub fn mollify(density: &ChargeDensity, n: usize, grid: &BoxGrid) -> Result<ChargeDensity> {
    if n == 0 {
        return Err(Error::InvalidParameter("mollification index must be ≥ 1".into()));
    }
    let radius = 1.0 / n as f64;
    let h = grid.spacing();
    if radius < h {
        return Err(Error::SubResolution { radius, spacing: h });
    }
    let base_values = density.grid_values(grid)?;
    let dim = grid.dim();
    let reach = (radius / h).floor() as i64;

    // Kernel stencil over integer offsets within the support.
    let mut offsets: Vec<(Vec<i64>, f64)> = Vec::new();
    let mut digit = vec![-reach; dim];
    'outer: loop {
        let r: f64 = digit.iter().map(|&d| (d as f64 * h).powi(2)).sum::<f64>().sqrt();
        let w = bump_profile(r / radius);
        if w > 0.0 {
            offsets.push((digit.clone(), w));
        }
        for i in (0..dim).rev() {
            digit[i] += 1;
            if digit[i] <= reach {
                continue 'outer;
            }
            digit[i] = -reach;
            if i == 0 {
                break 'outer;
            }
        }
    }
    let total_w: f64 = offsets.iter().map(|(_, w)| w).sum();
    for o in &mut offsets {
        o.1 /= total_w;
    }

    let npa = grid.points_per_axis() as i64;
    let strides = grid.node_strides();
    let mut out = vec![0.0f64; grid.node_count()];
    out.par_iter_mut().enumerate().for_each(|(idx, slot)| {
        let mut coords = vec![0usize; dim];
        grid.node_coords(idx, &mut coords);
        let mut acc = 0.0;
        'stencil: for (off, w) in &offsets {
            let mut src = 0usize;
            for i in 0..dim {
                let c = coords[i] as i64 + off[i];
                if c < 0 || c >= npa {
                    continue 'stencil; // zero padding outside the box
                }
                src += c as usize * strides[i];
            }
            acc += w * base_values[src];
        }
        *slot = acc;
    });

    Ok(ChargeDensity {
        dim,
        kind: ChargeKind::Mollified {
            base: Box::new(density.clone()),
            scale: radius,
            grid: *grid,
            values: out,
        },
        cached_norms: BTreeMap::new(),
    })
}

/// Fraction of the sphere `S_s(0)` lying inside the ball `B_t(x)`, `|x| = d`.
fn cap_fraction(dim: usize, d: f64, s: f64, t: f64) -> f64 {
    if t >= d + s {
        return 1.0;
    }
    if t + s.min(d) <= s.max(d) {
        return 0.0;
    }
    let c = ((d * d + s * s - t * t) / (2.0 * d * s)).clamp(-1.0, 1.0);
    if dim == 3 {
        return (1.0 - c) / 2.0;
    }
    let expo = (dim as f64 - 3.0) / 2.0;
    let num = quad::integrate(|u| (1.0 - u * u).powf(expo), c, 1.0, 1e-10)
        .unwrap_or(0.0);
    let den = quad::integrate(|u| (1.0 - u * u).powf(expo), -1.0, 1.0, 1e-12)
        .unwrap_or(1.0);
    (num / den).clamp(0.0, 1.0)
}

/// Mass `|μ|(B_t(x))` of a radial density around a center at distance `d`.
pub fn radial_mass_in_ball(density: &RadialDensity, dim: usize, d: f64, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let shell = unit_sphere_area(dim);
    let r_sup = density.support_radius();
    if d <= 1e-300 {
        return Ok(shell * density.flux(dim, t.min(r_sup))?);
    }
    // Shells entirely inside the ball.
    let full = if t > d {
        shell * density.flux(dim, (t - d).min(r_sup))?
    } else {
        0.0
    };
    // Partial shells s ∈ (|d-t|, d+t), intersected with the support.
    let lo = (d - t).abs().min(r_sup);
    let hi = (d + t).min(r_sup);
    if hi <= lo {
        return Ok(full);
    }
    let n = dim as f64;
    let partial = shell
        * quad::integrate(
            |s| {
                s.powf(n - 1.0) * density.value(s).abs() * cap_fraction(dim, d, s, t)
            },
            lo,
            hi,
            1e-9,
        )?;
    Ok(full + partial)
}

/// Linear Riesz potential of a radial density at distance `r` from the
/// origin: `∫_0^∞ |μ|(B_t(x)) t^{-N} dt`.
///
/// The tail beyond the support is closed analytically; divergence at the
/// evaluation point (a too-singular datum at its own singularity) is
/// detected and reported.
pub fn riesz_potential_radial(density: &RadialDensity, dim: usize, r: f64) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::InvalidParameter("negative evaluation distance".into()));
    }
    let n = dim as f64;
    if matches!(density, RadialDensity::Zero) {
        return Ok(0.0);
    }
    let r_sup = density.support_radius();
    let shell = unit_sphere_area(dim);
    let total_mass = shell * density.flux(dim, r_sup)?;
    if r <= 1e-300 {
        // At the center: ∫_0^{r_sup} S F(t) t^{-N} dt + exact tail.
        if let RadialDensity::Power(PowerDatum { exponent, .. }) = density {
            // F(t) ~ t^{N-1-β} so the integrand ~ t^{-1-β}: integrable iff β < 0.
            if *exponent >= 0.0 {
                return Err(Error::DivergentIntegral(format!(
                    "Riesz potential of r^(-1-{exponent}) diverges at the origin"
                )));
            }
        }
        let near = quad::integrate(
            |t| shell * density.flux(dim, t).unwrap_or(f64::NAN) * t.powf(-n),
            0.0,
            r_sup,
            1e-9,
        )?;
        let tail = total_mass * r_sup.powf(1.0 - n) / (n - 1.0);
        return Ok(near + tail);
    }
    let split = r + r_sup;
    let near = quad::integrate(
        |t| radial_mass_in_ball(density, dim, r, t).unwrap_or(f64::NAN) * t.powf(-n),
        0.0,
        split,
        1e-8,
    )?;
    let tail = total_mass * split.powf(1.0 - n) / (n - 1.0);
    Ok(near + tail)
}

/// Recursive product quadrature over the unit sphere `S^{dim-1}`.
///
/// `f` receives a unit vector; polar levels use 24-point Gauss-Legendre in
/// the cosine, the innermost circle a 48-point trapezoid (spectrally exact
/// for smooth integrands).
pub fn sphere_integral<F: Fn(&[f64]) -> f64>(dim: usize, f: F) -> f64 {
    fn recurse<F: Fn(&[f64]) -> f64>(
        dim: usize,
        f: &F,
        prefix: &mut Vec<f64>,
        scale: f64,
    ) -> f64 {
        if dim == 2 {
            let m = 48;
            let mut acc = 0.0;
            for k in 0..m {
                let phi = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / m as f64;
                prefix.push(scale * phi.cos());
                prefix.push(scale * phi.sin());
                acc += f(prefix);
                prefix.truncate(prefix.len() - 2);
            }
            return acc * 2.0 * std::f64::consts::PI / m as f64;
        }
        // dσ_{S^{d-1}} = sin^{d-2}θ dθ dσ_{S^{d-2}}; working in the angle
        // keeps the weight analytic for every dimension.
        let pts = gauss_legendre_32();
        let expo = dim as i32 - 2;
        let mut acc = 0.0;
        for &(x, w) in pts {
            let theta = std::f64::consts::FRAC_PI_2 * (x + 1.0);
            let (sin_t, cos_t) = theta.sin_cos();
            prefix.push(scale * cos_t);
            let inner = recurse(dim - 1, f, prefix, scale * sin_t);
            prefix.pop();
            acc += w * std::f64::consts::FRAC_PI_2 * sin_t.powi(expo) * inner;
        }
        acc
    }
    let mut prefix = Vec::with_capacity(dim);
    recurse(dim, &f, &mut prefix, 1.0)
}

/// Report of a truncated Wolff potential evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WolffReport {
    pub value: f64,
    /// The Hölder bound route `ω_N^{(q-1)/q} |ρ|_q r^{1-α-N/q}/(1-α-N/q)`,
    /// present when `(q, |ρ|_q)` are supplied and `α + N/q < 1`.
    pub holder_bound: Option<f64>,
}

/// Truncated Wolff potential `∫_0^r (∫_{B_t(x)} |ρ|) t^{-N+(1-α)} dt/t` of a
/// grid density, by Fubini reduced to a single radial integral of spherical
/// means of the multilinearly interpolated `|ρ|`.
pub fn wolff_potential_truncated(
    values: &[f64],
    grid: &BoxGrid,
    x: &[f64],
    r: f64,
    alpha: f64,
    q_and_norm: Option<(f64, f64)>,
) -> Result<WolffReport> {
    let dim = grid.dim();
    let n = dim as f64;
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} must lie in [0,1)")));
    }
    for i in 0..dim {
        if x[i].abs() + r > grid.extent() + 1e-12 {
            return Err(Error::OutOfDomain(format!(
                "ball of radius {r} at {x:?} exceeds the box"
            )));
        }
    }
    let interp_abs = |point: &[f64]| -> f64 { interpolate_abs(values, grid, point) };
    // ∫_0^r A(s) (s^{1-N-α} - r^{1-N-α})/(N-1+α) ds with
    // A(s) = s^{N-1} ∫_{S^{N-1}} |ρ(x+sσ)| dσ; the s^{-α} endpoint factor is
    // handled by the power-singular substitution.
    let denom = n - 1.0 + alpha;
    let r_tail = r.powf(1.0 - n - alpha);
    let value = quad::integrate_power_singular(
        |s| {
            let mean = sphere_integral(dim, |sigma| {
                let mut p = vec![0.0f64; dim];
                for i in 0..dim {
                    p[i] = x[i] + s * sigma[i];
                }
                interp_abs(&p)
            });
            // factor s^{-α} lives in the substitution: here multiply back
            // s^{N-1} · (s^{1-N-α} - r^{1-N-α}) · s^{α} = s^{α+N-1} ( ... )
            mean * (s.powf(n - 1.0 + alpha) * (s.powf(1.0 - n - alpha) - r_tail)) / denom
        },
        alpha,
        r,
        1e-8,
    )?;

    let holder_bound = match q_and_norm {
        Some((q, norm)) => {
            let expo = 1.0 - alpha - n / q;
            if expo <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "Hölder bound needs α + N/q < 1, got α={alpha}, N/q={}",
                    n / q
                )));
            }
            Some(unit_ball_volume(dim).powf((q - 1.0) / q) * norm * r.powf(expo) / expo)
        }
        None => None,
    };
    Ok(WolffReport { value, holder_bound })
}

fn interpolate_abs(values: &[f64], grid: &BoxGrid, point: &[f64]) -> f64 {
    let dim = grid.dim();
    let h = grid.spacing();
    let npa = grid.points_per_axis();
    let strides = grid.node_strides();
    let mut base = 0usize;
    let mut frac = [0.0f64; 8];
    for i in 0..dim {
        let t = ((point[i] + grid.extent()) / h).clamp(0.0, (npa - 1) as f64);
        let mut k = t.floor() as usize;
        if k >= npa - 1 {
            k = npa - 2;
        }
        frac[i] = t - k as f64;
        base += k * strides[i];
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << dim) {
        let mut w = 1.0;
        let mut idx = base;
        for i in 0..dim {
            if corner & (1 << i) != 0 {
                w *= frac[i];
                idx += strides[i];
            } else {
                w *= 1.0 - frac[i];
            }
        }
        if w != 0.0 {
            acc += w * values[idx].abs();
        }
    }
    acc
}
