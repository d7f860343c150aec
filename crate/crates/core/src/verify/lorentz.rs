//! Lorentz distance `l(x,x₀) = [(x-x₀)² - (u(x)-u(x₀))²]^{1/2}` and the cell
//! masks of its sublevel sets `K_R`. For weakly spacelike `u` the Euclidean
//! ball is always contained: `l ≤ |x-x₀|`.

use crate::grid::{BoxGrid, GridField};
use crate::{Error, Result};

/// Mask of cells with `l(center, x0) < R` for a potential given as a
/// function. Errors if the sampled values violate the spacelike bound
/// `|u(x)-u(x₀)| ≤ |x-x₀|` beyond tolerance.
pub fn lorentz_ball_mask_fn<F: Fn(&[f64]) -> f64>(
    grid: &BoxGrid,
    u: F,
    x0: &[f64],
    radius: f64,
) -> Result<Vec<bool>> {
    let dim = grid.dim();
    let u0 = u(x0);
    let mut mask = vec![false; grid.cell_count()];
    let mut coords = vec![0usize; dim];
    let mut center = vec![0.0f64; dim];
    for (cell, slot) in mask.iter_mut().enumerate() {
        grid.cell_coords(cell, &mut coords);
        grid.cell_center(&coords, &mut center);
        let dist_sq: f64 = center
            .iter()
            .zip(x0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let du = u(&center) - u0;
        let l_sq = dist_sq - du * du;
        if l_sq < -1e-9 * dist_sq.max(1e-30) {
            return Err(Error::ConstraintViolation(format!(
                "spacelike bound violated at cell {cell}: |Δu|² = {} > |Δx|² = {dist_sq}",
                du * du
            )));
        }
        *slot = l_sq.max(0.0) < radius * radius;
    }
    Ok(mask)
}

/// Mask of cells with `l < R` for a grid field (multilinear interpolation
/// at `x₀`, corner average at cell centers).
pub fn lorentz_ball_mask(u: &GridField, x0: &[f64], radius: f64) -> Result<Vec<bool>> {
    lorentz_ball_mask_fn(u.grid(), |p| u.interpolate(p), x0, radius)
}

/// Mask of cells whose centers lie in the Euclidean ball `B_R(x₀)`.
pub fn euclidean_ball_mask(grid: &BoxGrid, x0: &[f64], radius: f64) -> Vec<bool> {
    let dim = grid.dim();
    let mut mask = vec![false; grid.cell_count()];
    let mut coords = vec![0usize; dim];
    let mut center = vec![0.0f64; dim];
    for (cell, slot) in mask.iter_mut().enumerate() {
        grid.cell_coords(cell, &mut coords);
        grid.cell_center(&coords, &mut center);
        let dist_sq: f64 = center
            .iter()
            .zip(x0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        *slot = dist_sq < radius * radius;
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> BoxGrid {
        BoxGrid::new(3, 1.0, 17).unwrap()
    }

    #[test]
    fn zero_potential_reduces_to_euclidean_ball() {
        let grid = grid3();
        let x0 = [0.1, -0.2, 0.0];
        let r = 0.55;
        let k = lorentz_ball_mask_fn(&grid, |_| 0.0, &x0, r).unwrap();
        let b = euclidean_ball_mask(&grid, &x0, r);
        assert_eq!(k, b);

        let f = GridField::zeros(grid);
        assert_eq!(lorentz_ball_mask(&f, &x0, r).unwrap(), b);
    }

    #[test]
    fn affine_potential_dilates_along_its_gradient() {
        // u = 0.8 x₁: l² = (Δx)² - 0.64 Δx₁², an ellipsoid strictly
        // containing B_R and elongated along e₁.
        let grid = grid3();
        let x0 = [0.0; 3];
        let r = 0.5;
        let k = lorentz_ball_mask_fn(&grid, |x| 0.8 * x[0], &x0, r).unwrap();
        let b = euclidean_ball_mask(&grid, &x0, r);
        let mut strictly_more = 0;
        for (cell, (&kb, &bb)) in k.iter().zip(&b).enumerate() {
            assert!(!bb || kb, "B_R ⊆ K_R failed at cell {cell}");
            if kb && !bb {
                strictly_more += 1;
            }
        }
        assert!(strictly_more > 0, "K_R should strictly contain B_R");

        // Strict spacelikeness caps the dilation: K_R sits inside the
        // Euclidean ball of radius R/√(1-0.64).
        let stretched = euclidean_ball_mask(&grid, &x0, r / (1.0f64 - 0.64).sqrt() + 1e-12);
        for (kb, sb) in k.iter().zip(&stretched) {
            assert!(!kb || *sb, "K_R escaped the stretched ball");
        }
    }

    #[test]
    fn admissible_grid_fields_contain_the_euclidean_ball() {
        let grid = grid3();
        let u = GridField::from_fn(grid, |x| {
            0.25 * (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]) * (1.0 - x[2] * x[2])
        });
        let x0 = [0.2, 0.0, -0.1];
        let r = 0.4;
        let k = lorentz_ball_mask(&u, &x0, r).unwrap();
        let b = euclidean_ball_mask(u.grid(), &x0, r);
        for (kb, bb) in k.iter().zip(&b) {
            assert!(!bb || *kb);
        }
    }

    #[test]
    fn blatant_spacelike_violation_is_reported() {
        let grid = grid3();
        assert!(lorentz_ball_mask_fn(&grid, |x| 3.0 * x[0], &[0.0; 3], 0.5).is_err());
    }
}
