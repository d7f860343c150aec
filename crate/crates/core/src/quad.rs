//! Adaptive Gauss-Kronrod quadrature (G7/K15) plus substitutions for the
//! endpoint power singularities and infinite tails that the radial and
//! potential integrals produce.

use crate::{Error, Result};

// QUADPACK 15-point Kronrod abscissae on [-1, 1] (nonnegative half).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Embedded 7-point Gauss weights (for XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7/K15 evaluation on `[a, b]`; returns `(kronrod, |kronrod - gauss|)`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    kronrod *= half;
    gauss *= half;
    (kronrod, (kronrod - gauss).abs())
}

/// Adaptive integral of `f` over the finite interval `[a, b]` to relative
/// tolerance `tol` (with a tiny absolute floor for integrals near zero).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut stack = vec![(a, b, 0u32)];
    let mut total = 0.0f64;
    let mut err_total = 0.0f64;
    let mut intervals = 0usize;
    // First coarse pass to set the scale for the relative test.
    let (coarse, _) = gk15(&f, a, b);
    let scale = coarse.abs().max(1e-300);

    while let Some((lo, hi, depth)) = stack.pop() {
        intervals += 1;
        if intervals > 200_000 {
            return Err(Error::QuadratureFailure(format!(
                "interval budget exhausted on [{a}, {b}]"
            )));
        }
        let (val, err) = gk15(&f, lo, hi);
        if !val.is_finite() {
            return Err(Error::QuadratureFailure(format!(
                "non-finite integrand value in [{lo}, {hi}]"
            )));
        }
        let local_tol = tol * scale.max(total.abs()) * ((hi - lo) / (b - a)).abs().max(1e-8);
        if err <= local_tol || depth >= 60 || (hi - lo).abs() < 1e-15 * (b - a).abs() {
            total += val;
            err_total += err;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    let allowed = (tol.max(1e-14) * total.abs().max(scale) * 100.0).max(1e-11);
    if err_total > allowed {
        return Err(Error::QuadratureFailure(format!(
            "estimated error {err_total:.3e} too large for tolerance {tol:.1e}"
        )));
    }
    Ok(total)
}

/// `∫_0^b s^{-beta} f(s) ds` with `beta < 1`, exact in the singular factor:
/// the substitution `σ = s^{1-beta}` removes the endpoint singularity.
pub fn integrate_power_singular<F: Fn(f64) -> f64>(
    f: F,
    beta: f64,
    b: f64,
    tol: f64,
) -> Result<f64> {
    if beta >= 1.0 {
        return Err(Error::DivergentIntegral(format!(
            "s^(-{beta}) is not integrable at 0"
        )));
    }
    if beta <= 0.0 {
        return integrate(|s| s.powf(-beta) * f(s), 0.0, b, tol);
    }
    let p = 1.0 - beta;
    integrate(|sigma| f(sigma.powf(1.0 / p)) / p, 0.0, b.powf(p), tol)
}

/// `∫_a^∞ f(t) dt` via the rational substitution `t = a + x/(1-x)`.
///
/// The integrand must decay fast enough for the transformed integrand to be
/// bounded near `x = 1`; callers handle slowly decaying tails analytically.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Result<f64> {
    integrate(
        |x| {
            let om = 1.0 - x;
            let t = a + x / om;
            f(t) / (om * om)
        },
        0.0,
        1.0,
        tol,
    )
}
