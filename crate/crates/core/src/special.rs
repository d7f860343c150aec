//! Dimensional constants and small special-function helpers shared across
//! the crate: unit-ball volumes, sphere areas, embedding constants, and the
//! normalization of the standard compactly supported mollifier.

use crate::quad;
use std::f64::consts::PI;

/// Volume of the unit ball in `R^N`: `π^{N/2} / Γ(N/2 + 1)`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    PI.powf(dim as f64 / 2.0) / libm::tgamma(dim as f64 / 2.0 + 1.0)
}

/// Surface area of the unit sphere `S^{N-1}` in `R^N`: `N ω_N`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    dim as f64 * unit_ball_volume(dim)
}

/// Stable evaluation of `1 - √(1 - t)` for `t ∈ [0, 1]`.
///
/// The naive form loses all significance for small `t`; the equivalent
/// `t / (1 + √(1 - t))` is exact at `t = 0` and keeps the lower sandwich
/// bound `t/2 ≤ 1 - √(1 - t)` valid in floating point.
#[inline]
pub fn one_minus_sqrt_one_minus(t: f64) -> f64 {
    debug_assert!((-1e-12..=1.0 + 1e-12).contains(&t), "t out of range: {t}");
    let t = t.clamp(0.0, 1.0);
    t / (1.0 + (1.0 - t).sqrt())
}

/// Sharp constant of the Sobolev embedding `D^{1,k}(R^N) ↪ L^{k*}(R^N)`,
/// `k* = Nk/(N-k)`, i.e. the smallest `C` with `|u|_{k*} ≤ C |∇u|_k`
/// (Talenti's value), valid for `1 < k < N`.
pub fn sobolev_embedding_constant(dim: usize, k: f64) -> f64 {
    let n = dim as f64;
    assert!(k > 1.0 && k < n, "embedding requires 1 < k < N");
    let g = libm::tgamma;
    PI.powf(-0.5)
        * n.powf(-1.0 / k)
        * ((k - 1.0) / (n - k)).powf(1.0 - 1.0 / k)
        * (g(1.0 + n / 2.0) * g(n) / (g(n / k) * g(1.0 + n - n / k))).powf(1.0 / n)
}

/// An explicit constant for the Morrey-type bound
/// `|u|_∞ ≤ C (|u|_s + |∇u|_s)` on `R^N` with `s > N`.
///
/// Assembled from the textbook chain: bound `|u(x)|` by the average over a
/// unit ball plus the Riesz-type oscillation integral, then apply Hölder.
/// Any finite admissible value works here; the exact choice is recorded in
/// reports so downstream numbers are auditable.
pub fn morrey_embedding_constant(dim: usize, s: f64) -> f64 {
    let n = dim as f64;
    assert!(s > n, "Morrey bound requires s > N");
    let s_conj = s / (s - 1.0);
    // |avg_{B_1} u| ≤ ω_N^{-1/s} |u|_s, by Hölder on the unit ball.
    let avg_part = unit_ball_volume(dim).powf(-1.0 / s);
    // |u(x) - avg_{B_1} u| ≤ 2^N ∫_{B_1} |∇u(y)| |x-y|^{1-N} dy, then Hölder:
    // the |x-y|^{(1-N)s'} moment over B_1 equals ω_{N-1} (s-1)/(s-N).
    let osc_part = 2f64.powf(n)
        * (unit_sphere_area(dim) * (s - 1.0) / (s - n)).powf(1.0 / s_conj);
    avg_part + osc_part
}

/// Normalization constant `A_N` of the standard mollifier
/// `φ(x) = A_N exp(-1/(1-|x|²))` on the unit ball, so that `∫ φ = 1`.
/// Memoized per dimension; it sits in sampling inner loops.
pub fn bump_normalization(dim: usize) -> f64 {
    use std::sync::OnceLock;
    const MAX_DIM: usize = 16;
    static CACHE: OnceLock<Vec<OnceLock<f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (0..=MAX_DIM).map(|_| OnceLock::new()).collect());
    assert!(dim <= MAX_DIM, "dimension {dim} outside supported range");
    *cache[dim].get_or_init(|| {
        let shell = unit_sphere_area(dim);
        let raw = quad::integrate(
            |s| s.powi(dim as i32 - 1) * (-1.0 / (1.0 - s * s)).exp(),
            0.0,
            1.0,
            1e-14,
        )
        .expect("bump moment integral is finite");
        1.0 / (shell * raw)
    })
}

/// Unnormalized bump profile `exp(-1/(1-r²))` for `r ∈ [0, 1)`, zero outside.
#[inline]
pub fn bump_profile(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

/// Quintic ramp on `[0,1]`: `p(0)=0, p(1)=1`, with `p'(0)=p'(1)=0` and
/// `p''(0)=p''(1)=0` (the C² smoothstep). Monotone on `[0,1]`.
#[inline]
pub fn smoothstep_quintic(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ball_volumes_match_closed_forms() {
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, max_relative = 1e-14);
        assert_relative_eq!(unit_ball_volume(4), PI * PI / 2.0, max_relative = 1e-14);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn sobolev_constant_matches_known_n3_k2_value() {
        // For N=3, k=2 the sharp constant is S^{-1/2} with S = 3 (π/2)^{4/3}.
        let s = 3.0 * (PI / 2.0).powf(4.0 / 3.0);
        assert_relative_eq!(
            sobolev_embedding_constant(3, 2.0),
            s.powf(-0.5),
            max_relative = 1e-12
        );
    }

    #[test]
    fn stable_sqrt_form_keeps_lower_sandwich_bound() {
        for &t in &[0.0, 1e-18, 1e-12, 1e-6, 0.3, 0.9999, 1.0] {
            let v = one_minus_sqrt_one_minus(t);
            assert!(v >= 0.5 * t, "lower bound failed at t={t}: {v}");
            assert!(v <= t + f64::EPSILON, "upper bound failed at t={t}: {v}");
        }
        assert_eq!(one_minus_sqrt_one_minus(0.0), 0.0);
    }

    #[test]
    fn bump_normalization_gives_unit_mass() {
        for dim in 3..=4 {
            let a = bump_normalization(dim);
            let mass = quad::integrate(
                |s| {
                    a * unit_sphere_area(dim) * s.powi(dim as i32 - 1) * bump_profile(s)
                },
                0.0,
                1.0,
                1e-13,
            )
            .unwrap();
            assert_relative_eq!(mass, 1.0, max_relative = 1e-11);
        }
    }

    #[test]
    fn smoothstep_endpoints_and_monotonicity() {
        assert_eq!(smoothstep_quintic(0.0), 0.0);
        assert_eq!(smoothstep_quintic(1.0), 1.0);
        let mut prev = 0.0;
        for i in 0..=100 {
            let v = smoothstep_quintic(i as f64 / 100.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }
}
