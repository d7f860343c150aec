//! Uniform box grids in dimension `N ≥ 3`, scalar fields with zero boundary
//! trace, staggered discrete gradients, and the norms built on them.
//!
//! The gradient is discretized by forward differences living on faces; the
//! pointwise constraint `|∇u| ≤ 1` is imposed on the face values averaged to
//! cell centers, which keeps the discrete energy convex in the nodal values.

use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Tolerance for "gradient norm ≤ 1" checks: machine-precision slack left
/// over after projections.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// A uniform grid on the box `[-extent, extent]^dim`.
///
/// `points_per_axis` is odd so the origin is a grid node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    dim: usize,
    extent: f64,
    points_per_axis: usize,
}

impl BoxGrid {
    pub fn new(dim: usize, extent: f64, points_per_axis: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::InvalidGrid(format!("dim {dim} < 3")));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::InvalidGrid(format!("extent {extent} must be positive")));
        }
        if points_per_axis < 9 || points_per_axis % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "points_per_axis {points_per_axis} must be odd and ≥ 9"
            )));
        }
        Ok(Self { dim, extent, points_per_axis })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Mesh width `h = 2 extent / (points_per_axis - 1)`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.points_per_axis - 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn cells_per_axis(&self) -> usize {
        self.points_per_axis - 1
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis().pow(self.dim as u32)
    }

    /// Cell volume `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Row-major strides for node indexing (last axis fastest).
    pub fn node_strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.dim];
        for i in (0..self.dim - 1).rev() {
            s[i] = s[i + 1] * self.points_per_axis;
        }
        s
    }

    /// Row-major strides for cell indexing.
    pub fn cell_strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.dim];
        for i in (0..self.dim - 1).rev() {
            s[i] = s[i + 1] * self.cells_per_axis();
        }
        s
    }

    /// Decode a flat node index into per-axis coordinates.
    pub fn node_coords(&self, mut idx: usize, out: &mut [usize]) {
        let n = self.points_per_axis;
        for i in (0..self.dim).rev() {
            out[i] = idx % n;
            idx /= n;
        }
    }

    /// Decode a flat cell index into per-axis coordinates.
    pub fn cell_coords(&self, mut idx: usize, out: &mut [usize]) {
        let n = self.cells_per_axis();
        for i in (0..self.dim).rev() {
            out[i] = idx % n;
            idx /= n;
        }
    }

    /// Physical position of a node given its coordinates.
    pub fn node_position(&self, coords: &[usize], out: &mut [f64]) {
        let h = self.spacing();
        for i in 0..self.dim {
            out[i] = -self.extent + h * coords[i] as f64;
        }
    }

    /// Physical position of a cell center given cell coordinates.
    pub fn cell_center(&self, coords: &[usize], out: &mut [f64]) {
        let h = self.spacing();
        for i in 0..self.dim {
            out[i] = -self.extent + h * (coords[i] as f64 + 0.5);
        }
    }

    pub fn is_boundary_coords(&self, coords: &[usize]) -> bool {
        coords
            .iter()
            .any(|&c| c == 0 || c == self.points_per_axis - 1)
    }

    /// Index deltas of the `2^(N-1)` cell corners transverse to axis `axis`,
    /// relative to the cell's base corner node.
    pub fn transverse_corner_offsets(&self, axis: usize) -> Vec<usize> {
        let strides = self.node_strides();
        let others: Vec<usize> = (0..self.dim).filter(|&j| j != axis).collect();
        let mut offs = Vec::with_capacity(1 << (self.dim - 1));
        for mask in 0..(1usize << others.len()) {
            let mut delta = 0usize;
            for (bit, &j) in others.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    delta += strides[j];
                }
            }
            offs.push(delta);
        }
        offs
    }
}

/// A scalar field on a [`BoxGrid`] with identically zero boundary values
/// (the discrete stand-in for decay at infinity).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: BoxGrid,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: BoxGrid) -> Self {
        Self { grid, values: vec![0.0; grid.node_count()] }
    }

    /// Sample `f` at the grid nodes, forcing the boundary trace to zero.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: BoxGrid, f: F) -> Self {
        let mut values = vec![0.0; grid.node_count()];
        let mut coords = vec![0usize; grid.dim()];
        let mut pos = vec![0.0f64; grid.dim()];
        for (idx, v) in values.iter_mut().enumerate() {
            grid.node_coords(idx, &mut coords);
            if grid.is_boundary_coords(&coords) {
                continue;
            }
            grid.node_position(&coords, &mut pos);
            *v = f(&pos);
        }
        Self { grid, values }
    }

    /// Build from raw nodal values; rejects non-finite entries or a nonzero
    /// boundary trace.
    pub fn from_values(grid: BoxGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidGrid(format!(
                "value count {} does not match node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        let mut coords = vec![0usize; grid.dim()];
        for (idx, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidGrid(format!("non-finite value at node {idx}")));
            }
            grid.node_coords(idx, &mut coords);
            if grid.is_boundary_coords(&coords) && v != 0.0 {
                return Err(Error::InvalidGrid(format!(
                    "nonzero boundary value {v} at node {idx}"
                )));
            }
        }
        Ok(Self { grid, values })
    }

    /// Solver-internal constructor skipping validation; the caller guarantees
    /// finite values and a zero boundary trace.
    pub(crate) fn from_values_unchecked(grid: BoxGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access for solvers; the caller keeps the boundary at zero.
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Multilinear interpolation at an arbitrary point of the box.
    pub fn interpolate(&self, point: &[f64]) -> f64 {
        let grid = &self.grid;
        let h = grid.spacing();
        let n = grid.points_per_axis();
        let strides = grid.node_strides();
        let dim = grid.dim();
        let mut base = 0usize;
        let mut frac = vec![0.0f64; dim];
        for i in 0..dim {
            let t = ((point[i] + grid.extent()) / h).clamp(0.0, (n - 1) as f64);
            let mut k = t.floor() as usize;
            if k >= n - 1 {
                k = n - 2;
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
                acc += w * self.values[idx];
            }
        }
        acc
    }
}

/// Staggered (face-centered) gradient: component `i` lives at midpoints of
/// edges along axis `i`, so its array has `n-1` entries along `i` and `n`
/// along the other axes.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    grid: BoxGrid,
    components: Vec<Vec<f64>>,
}

impl GradientField {
    #[cfg(test)]
    pub(crate) fn from_components(grid: BoxGrid, components: Vec<Vec<f64>>) -> Self {
        Self { grid, components }
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    /// Average the staggered components to cell centers; returns a cell-major
    /// array of `dim` components per cell.
    pub fn cell_averaged(&self) -> Vec<f64> {
        cell_gradients_impl(&self.grid, None, Some(&self.components))
    }
}

/// Forward-difference gradient of `field` on faces. Exact for affine fields
/// on interior faces.
pub fn gradient(field: &GridField) -> GradientField {
    let grid = *field.grid();
    let dim = grid.dim();
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let strides = grid.node_strides();
    let values = field.values();
    let mut components = Vec::with_capacity(dim);
    for axis in 0..dim {
        // Face-array shape: n-1 along `axis`, n along the others.
        let mut shape = vec![n; dim];
        shape[axis] = n - 1;
        let len: usize = shape.iter().product();
        let mut comp = vec![0.0f64; len];
        let mut fcoords = vec![0usize; dim];
        for (fidx, c) in comp.iter_mut().enumerate() {
            let mut rem = fidx;
            for i in (0..dim).rev() {
                fcoords[i] = rem % shape[i];
                rem /= shape[i];
            }
            let mut tail = 0usize;
            for i in 0..dim {
                tail += fcoords[i] * strides[i];
            }
            *c = (values[tail + strides[axis]] - values[tail]) / h;
        }
        components.push(comp);
    }
    GradientField { grid, components }
}

/// Cell-centered gradient components straight from nodal values (fused path
/// used by the energy code; agrees with `gradient(...).cell_averaged()`).
pub fn cell_gradients(field: &GridField) -> Vec<f64> {
    cell_gradients_impl(field.grid(), Some(field.values()), None)
}

fn cell_gradients_impl(
    grid: &BoxGrid,
    nodal: Option<&[f64]>,
    faces: Option<&[Vec<f64>]>,
) -> Vec<f64> {
    let dim = grid.dim();
    let h = grid.spacing();
    let n = grid.points_per_axis();
    let cells = grid.cell_count();
    let node_strides = grid.node_strides();
    let inv_pairs = 1.0 / (1usize << (dim - 1)) as f64;
    let offsets: Vec<Vec<usize>> =
        (0..dim).map(|a| grid.transverse_corner_offsets(a)).collect();
    // Per-axis face strides (face arrays have n-1 entries along their axis).
    let face_strides: Vec<Vec<usize>> = (0..dim)
        .map(|axis| {
            let mut shape = vec![n; dim];
            shape[axis] = n - 1;
            let mut s = vec![1usize; dim];
            for i in (0..dim - 1).rev() {
                s[i] = s[i + 1] * shape[i + 1];
            }
            s
        })
        .collect();

    let mut out = vec![0.0f64; cells * dim];
    out.par_chunks_mut(dim)
        .enumerate()
        .for_each(|(cell, chunk)| {
            let mut coords = vec![0usize; dim];
            grid.cell_coords(cell, &mut coords);
            let mut base = 0usize;
            for i in 0..dim {
                base += coords[i] * node_strides[i];
            }
            for (axis, slot) in chunk.iter_mut().enumerate() {
                let mut acc = 0.0;
                match (nodal, faces) {
                    (Some(values), _) => {
                        let s = node_strides[axis];
                        for &off in &offsets[axis] {
                            let tail = base + off;
                            acc += values[tail + s] - values[tail];
                        }
                        acc /= h;
                    }
                    (None, Some(face_arrays)) => {
                        // Gather the 2^(N-1) faces of this cell along `axis`.
                        let fs = &face_strides[axis];
                        let others: Vec<usize> =
                            (0..dim).filter(|&j| j != axis).collect();
                        let mut fbase = 0usize;
                        for i in 0..dim {
                            fbase += coords[i] * fs[i];
                        }
                        for mask in 0..(1usize << others.len()) {
                            let mut fidx = fbase;
                            for (bit, &j) in others.iter().enumerate() {
                                if mask & (1 << bit) != 0 {
                                    fidx += fs[j];
                                }
                            }
                            acc += face_arrays[axis][fidx];
                        }
                    }
                    _ => unreachable!(),
                }
                *slot = acc * inv_pairs;
            }
        });
    out
}

/// Adjoint of [`cell_gradients`] as a linear map: returns the nodal array
/// `t` with `⟨w, G u⟩_cells = ⟨t, u⟩_nodes` for every field `u`. This is the
/// (negative) discrete divergence the energy gradient is built from; entries
/// at boundary nodes are forced to zero since those are not free variables.
pub fn cell_field_adjoint(grid: &BoxGrid, cell_vecs: &[f64]) -> Vec<f64> {
    let dim = grid.dim();
    let h = grid.spacing();
    let n = grid.points_per_axis();
    let nc = grid.cells_per_axis();
    let cell_strides = grid.cell_strides();
    let inv = 1.0 / ((1usize << (dim - 1)) as f64 * h);
    let others: Vec<Vec<usize>> = (0..dim)
        .map(|axis| (0..dim).filter(|&j| j != axis).collect())
        .collect();

    let mut out = vec![0.0f64; grid.node_count()];
    out.par_iter_mut().enumerate().for_each(|(p, slot)| {
        let mut coords = vec![0usize; dim];
        grid.node_coords(p, &mut coords);
        if grid.is_boundary_coords(&coords) {
            return;
        }
        let mut acc = 0.0;
        let mut cell = vec![0usize; dim];
        for axis in 0..dim {
            for mask in 0..(1usize << (dim - 1)) {
                // Transverse cell coordinates: p_j - 1 or p_j.
                let mut ok = true;
                for (bit, &j) in others[axis].iter().enumerate() {
                    let k = if mask & (1 << bit) != 0 {
                        coords[j] as i64 - 1
                    } else {
                        coords[j] as i64
                    };
                    if k < 0 || k >= nc as i64 {
                        ok = false;
                        break;
                    }
                    cell[j] = k as usize;
                }
                if !ok {
                    continue;
                }
                // Face with head = p (cell behind) adds, tail = p subtracts.
                if coords[axis] >= 1 {
                    cell[axis] = coords[axis] - 1;
                    let cidx: usize =
                        cell.iter().zip(&cell_strides).map(|(c, s)| c * s).sum();
                    acc += cell_vecs[cidx * dim + axis];
                }
                if coords[axis] <= n - 2 {
                    cell[axis] = coords[axis];
                    let cidx: usize =
                        cell.iter().zip(&cell_strides).map(|(c, s)| c * s).sum();
                    acc -= cell_vecs[cidx * dim + axis];
                }
            }
        }
        *slot = acc * inv;
    });
    out
}

/// Squared Euclidean norms of the cell-centered gradient.
pub fn cell_gradient_norms_sq(cell_grads: &[f64], dim: usize) -> Vec<f64> {
    cell_grads
        .par_chunks(dim)
        .map(|g| g.iter().map(|x| x * x).sum())
        .collect()
}

/// Maximum over cell centers of the Euclidean norm of the averaged gradient.
pub fn sup_gradient_norm(g: &GradientField) -> f64 {
    let dim = g.grid().dim();
    let cg = g.cell_averaged();
    cell_gradient_norms_sq(&cg, dim)
        .into_iter()
        .fold(0.0f64, f64::max)
        .sqrt()
}

/// Cell-centered `v = √(1 - |∇u|²)`, in `[0, 1]`.
///
/// Errors if any cell norm exceeds 1 beyond [`CONSTRAINT_TOL`].
pub fn v_field(g: &GradientField) -> Result<Vec<f64>> {
    let dim = g.grid().dim();
    let cg = g.cell_averaged();
    let norms_sq = cell_gradient_norms_sq(&cg, dim);
    let mut out = Vec::with_capacity(norms_sq.len());
    for (cell, ns) in norms_sq.into_iter().enumerate() {
        let norm = ns.sqrt();
        if norm > 1.0 + CONSTRAINT_TOL {
            return Err(Error::ConstraintViolation(format!(
                "cell {cell} has gradient norm {norm} > 1"
            )));
        }
        out.push((1.0 - ns).max(0.0).sqrt());
    }
    Ok(out)
}

/// Discrete `L^q` norm `(Σ |f|^q h^N)^{1/q}` with midpoint weights.
pub fn lq_norm(values: &[f64], grid: &BoxGrid, q: f64) -> Result<f64> {
    if q < 1.0 {
        return Err(Error::InvalidParameter(format!("L^q norm needs q ≥ 1, got {q}")));
    }
    let hn = grid.cell_volume();
    let sum: f64 = if (q - 2.0).abs() < 1e-14 {
        values.iter().map(|v| v * v).sum()
    } else if (q - 1.0).abs() < 1e-14 {
        values.iter().map(|v| v.abs()).sum()
    } else {
        values.iter().map(|v| v.abs().powf(q)).sum()
    };
    Ok((sum * hn).powf(1.0 / q))
}

/// Discrete `W^{2,2}` seminorm over the ball `B_radius(center)`:
/// `(Σ_{nodes in ball} Σ_{i,j} (D² u)_{ij}² h^N)^{1/2}` with central second
/// differences, restricted to nodes at least `2h` from the boundary.
pub fn w22_seminorm_ball(field: &GridField, center: &[f64], radius: f64) -> Result<f64> {
    let grid = field.grid();
    let dim = grid.dim();
    let h = grid.spacing();
    let n = grid.points_per_axis();
    for i in 0..dim {
        if center[i].abs() + radius > grid.extent() - 2.0 * h {
            return Err(Error::OutOfDomain(format!(
                "ball of radius {radius} at {center:?} is not 2h inside the box"
            )));
        }
    }
    let strides = grid.node_strides();
    let values = field.values();
    let mut coords = vec![0usize; dim];
    let mut pos = vec![0.0f64; dim];
    let mut sum = 0.0;
    for idx in 0..grid.node_count() {
        grid.node_coords(idx, &mut coords);
        if coords.iter().any(|&c| c < 2 || c > n - 3) {
            continue;
        }
        grid.node_position(&coords, &mut pos);
        let dist_sq: f64 = pos
            .iter()
            .zip(center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if dist_sq >= radius * radius {
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
        sum += frob;
    }
    Ok((sum * grid.cell_volume()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid3(n: usize) -> BoxGrid {
        BoxGrid::new(3, 1.0, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(BoxGrid::new(2, 1.0, 9).is_err());
        assert!(BoxGrid::new(3, 0.0, 9).is_err());
        assert!(BoxGrid::new(3, 1.0, 8).is_err());
        assert!(BoxGrid::new(3, 1.0, 7).is_err());
        let g = grid3(9);
        assert_relative_eq!(g.spacing(), 0.25);
        assert_eq!(g.node_count(), 729);
        assert_eq!(g.cell_count(), 512);
    }

    #[test]
    fn zero_field_has_zero_gradient() {
        let f = GridField::zeros(grid3(9));
        let g = gradient(&f);
        assert_eq!(sup_gradient_norm(&g), 0.0);
        for axis in 0..3 {
            assert!(g.component(axis).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn affine_field_has_unit_interior_gradient() {
        // u = x_1 clamped to zero at the boundary; away from the boundary the
        // first component is exactly 1 and the others exactly 0.
        let grid = grid3(17);
        let f = GridField::from_fn(grid, |x| x[0]);
        let cg = cell_gradients(&f);
        let dim = 3;
        let mut coords = vec![0usize; dim];
        for cell in 0..grid.cell_count() {
            grid.cell_coords(cell, &mut coords);
            if coords.iter().any(|&c| c < 2 || c >= grid.cells_per_axis() - 2) {
                continue;
            }
            assert_relative_eq!(cg[cell * dim], 1.0, max_relative = 1e-13);
            assert!(cg[cell * dim + 1].abs() < 1e-13);
            assert!(cg[cell * dim + 2].abs() < 1e-13);
        }
    }

    #[test]
    fn quadratic_gradient_hits_cell_centers_exactly() {
        // Forward difference of x_i² across a face equals the derivative at
        // the face midpoint; averaging to the cell center stays exact because
        // the transverse dependence is additive.
        let grid = grid3(17);
        let f = GridField::from_fn(grid, |x| x.iter().map(|c| c * c).sum());
        let cg = cell_gradients(&f);
        let mut coords = vec![0usize; 3];
        let mut center = vec![0.0f64; 3];
        for cell in 0..grid.cell_count() {
            grid.cell_coords(cell, &mut coords);
            if coords.iter().any(|&c| c < 2 || c >= grid.cells_per_axis() - 2) {
                continue;
            }
            grid.cell_center(&coords, &mut center);
            for i in 0..3 {
                assert_relative_eq!(cg[cell * 3 + i], 2.0 * center[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn staggered_and_fused_cell_gradients_agree() {
        let grid = grid3(11);
        let f = GridField::from_fn(grid, |x| (x[0] * 2.1).sin() * (x[1] - x[2] * 0.3).cos());
        let a = gradient(&f).cell_averaged();
        let b = cell_gradients(&f);
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, epsilon = 1e-14);
        }
    }

    #[test]
    fn v_field_limit_cases() {
        let grid = grid3(9);
        let zero = GridField::zeros(grid);
        let v = v_field(&gradient(&zero)).unwrap();
        assert!(v.iter().all(|&x| x == 1.0));

        // Synthetic face data with |∇u| ≡ 1 (the light-like limit): v ≡ 0.
        let n = grid.points_per_axis();
        let mut comps = Vec::new();
        for axis in 0..3 {
            let mut shape = [n, n, n];
            shape[axis] = n - 1;
            let len = shape.iter().product();
            comps.push(vec![if axis == 0 { 1.0 } else { 0.0 }; len]);
        }
        let g = GradientField::from_components(grid, comps);
        let v = v_field(&g).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn v_field_on_pyramid_slope_is_exact() {
        // u = 0.6 (ℓ - max_i |x_i|) vanishes on the whole boundary and has
        // |∇u| = 0.6 wherever one coordinate strictly dominates; cells in
        // such regions get v = 0.8 exactly.
        let grid = grid3(17);
        let f = GridField::from_fn(grid, |x| {
            0.6 * (1.0 - x.iter().fold(0.0f64, |m, c| m.max(c.abs())))
        });
        let v = v_field(&gradient(&f)).unwrap();
        let mut coords = vec![0usize; 3];
        let mut center = vec![0.0f64; 3];
        let mut checked = 0;
        for (cell, &vv) in v.iter().enumerate() {
            grid.cell_coords(cell, &mut coords);
            grid.cell_center(&coords, &mut center);
            let h = grid.spacing();
            // Keep cells whose x_0 dominates the others by a full cell.
            if center[0] > center[1].abs().max(center[2].abs()) + 2.0 * h
                && center[0] < 1.0 - 2.0 * h
            {
                assert_relative_eq!(vv, 0.8, max_relative = 1e-12);
                checked += 1;
            }
        }
        assert!(checked > 10, "too few cells exercised: {checked}");
    }

    #[test]
    fn v_field_rejects_violations() {
        let f = GridField::from_fn(grid3(17), |x| 2.0 * x[0]);
        assert!(v_field(&gradient(&f)).is_err());
    }

    #[test]
    fn lq_norm_of_indicator_counts_cells() {
        let grid = grid3(9);
        // 5 unit entries: (M h^N)^{1/q}
        let mut vals = vec![0.0; grid.cell_count()];
        for v in vals.iter_mut().take(5) {
            *v = 1.0;
        }
        for q in [1.0, 2.0, 3.5] {
            let want = (5.0 * grid.cell_volume()).powf(1.0 / q);
            assert_relative_eq!(lq_norm(&vals, &grid, q).unwrap(), want, max_relative = 1e-13);
        }
        assert!(lq_norm(&vals, &grid, 0.5).is_err());
    }

    #[test]
    fn l2_norm_of_coordinate_converges_to_analytic() {
        // ∫_{[-1,1]^3} x_1² dx = 8/3, so the L² norm tends to √(8/3).
        let want = (8.0f64 / 3.0).sqrt();
        let mut errs = Vec::new();
        for n in [17, 33, 65] {
            let grid = grid3(n);
            let f = GridField::from_fn(grid, |x| x[0]);
            // Evaluate at the nodes but through the cell-center quadrature to
            // keep the boundary clamp from polluting the estimate: use the
            // analytic sample at cell centers instead.
            let mut vals = vec![0.0; grid.cell_count()];
            let mut coords = vec![0usize; 3];
            let mut c = vec![0.0f64; 3];
            for (cell, v) in vals.iter_mut().enumerate() {
                grid.cell_coords(cell, &mut coords);
                grid.cell_center(&coords, &mut c);
                *v = c[0];
            }
            let got = lq_norm(&vals, &grid, 2.0).unwrap();
            errs.push((got - want).abs());
            let _ = f;
        }
        assert!(errs[2] < errs[0]);
        assert!(errs[2] < 1e-3);
    }

    #[test]
    fn w22_seminorm_of_affine_field_vanishes() {
        let f = GridField::from_fn(grid3(17), |x| x[0] + 0.5 * x[1]);
        let s = w22_seminorm_ball(&f, &[0.0, 0.0, 0.0], 0.4).unwrap();
        assert!(s < 1e-12, "affine Hessian must vanish, got {s}");
    }

    #[test]
    fn w22_seminorm_of_half_square_norm_counts_volume() {
        // u = |x|²/2 has identity Hessian: the integrand is N on every node,
        // so the seminorm squared is N · (#nodes in ball) · h^N exactly.
        let grid = grid3(17);
        let f = GridField::from_fn(grid, |x| 0.5 * x.iter().map(|c| c * c).sum::<f64>());
        let radius = 0.4;
        let got = w22_seminorm_ball(&f, &[0.0; 3], radius).unwrap();
        let h = grid.spacing();
        let mut count = 0usize;
        let mut coords = vec![0usize; 3];
        let mut pos = vec![0.0f64; 3];
        for idx in 0..grid.node_count() {
            grid.node_coords(idx, &mut coords);
            if coords.iter().any(|&c| c < 2 || c > grid.points_per_axis() - 3) {
                continue;
            }
            grid.node_position(&coords, &mut pos);
            if pos.iter().map(|c| c * c).sum::<f64>() < radius * radius {
                count += 1;
            }
        }
        let want = (3.0 * count as f64 * h.powi(3)).sqrt();
        assert_relative_eq!(got, want, max_relative = 1e-12);
    }

    #[test]
    fn w22_seminorm_rejects_boundary_hugging_balls() {
        let f = GridField::zeros(grid3(9));
        assert!(w22_seminorm_ball(&f, &[0.0; 3], 0.95).is_err());
    }

    #[test]
    fn discrete_operators_converge_on_gaussian() {
        // Empirical refinement orders on exp(-|x|²): the averaged gradient is
        // at least first order (second in practice) and the Hessian Frobenius
        // integrand second order.
        let mut grad_err = Vec::new();
        let mut hess_err = Vec::new();
        for n in [17, 33, 65] {
            let grid = grid3(n);
            let f = GridField::from_fn(grid, |x| {
                (-x.iter().map(|c| c * c).sum::<f64>()).exp()
            });
            let cg = cell_gradients(&f);
            let mut coords = vec![0usize; 3];
            let mut c = vec![0.0f64; 3];
            let mut worst = 0.0f64;
            for cell in 0..grid.cell_count() {
                grid.cell_coords(cell, &mut coords);
                if coords
                    .iter()
                    .any(|&k| k < 2 || k >= grid.cells_per_axis() - 2)
                {
                    continue;
                }
                grid.cell_center(&coords, &mut c);
                let r2: f64 = c.iter().map(|v| v * v).sum();
                let e = (-r2).exp();
                for i in 0..3 {
                    let exact = -2.0 * c[i] * e;
                    worst = worst.max((cg[cell * 3 + i] - exact).abs());
                }
            }
            grad_err.push(worst);

            // Hessian integrand at the origin node.
            let h = grid.spacing();
            let strides = grid.node_strides();
            let mid = grid.node_count() / 2;
            let vals = f.values();
            let d11 = (vals[mid + strides[0]] - 2.0 * vals[mid] + vals[mid - strides[0]])
                / (h * h);
            hess_err.push((d11 - (-2.0)).abs());
        }
        let order = |e: &[f64]| (e[0] / e[2]).log2() / 2.0;
        assert!(
            order(&grad_err) > 0.95,
            "gradient order too low: {grad_err:?}"
        );
        assert!(
            order(&hess_err) > 1.8,
            "hessian order too low: {hess_err:?}"
        );
    }

    #[test]
    fn adjoint_identity_holds() {
        // ⟨w, G u⟩_cells = ⟨adjoint(w), u⟩_nodes for arbitrary w, u.
        let grid = grid3(9);
        let u = GridField::from_fn(grid, |x| (1.7 * x[0]).sin() * x[1] + x[2] * x[2]);
        let w: Vec<f64> = (0..grid.cell_count() * 3)
            .map(|k| ((k * 2654435761) % 1000) as f64 / 1000.0 - 0.5)
            .collect();
        let gu = cell_gradients(&u);
        let lhs: f64 = w.iter().zip(&gu).map(|(a, b)| a * b).sum();
        let t = cell_field_adjoint(&grid, &w);
        let rhs: f64 = t.iter().zip(u.values()).map(|(a, b)| a * b).sum();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-11);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn gradient_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let grid = grid3(9);
            let f = GridField::from_fn(grid, |x| (x[0] * 1.3).sin() * x[1]);
            let g = GridField::from_fn(grid, |x| x[2] * x[2] - 0.4 * x[0]);
            let combo = GridField::from_values(
                grid,
                f.values()
                    .iter()
                    .zip(g.values())
                    .map(|(u, v)| a * u + b * v)
                    .collect(),
            )
            .unwrap();
            let lhs = cell_gradients(&combo);
            let gf = cell_gradients(&f);
            let gg = cell_gradients(&g);
            for i in 0..lhs.len() {
                let want = a * gf[i] + b * gg[i];
                prop_assert!((lhs[i] - want).abs() < 1e-10 * (1.0 + want.abs()));
            }
        }

        #[test]
        fn lq_norm_is_absolutely_homogeneous(c in -5.0f64..5.0, q in 1.0f64..6.0) {
            let grid = grid3(9);
            let f = GridField::from_fn(grid, |x| (x[0] + 0.2 * x[1]).cos());
            let scaled: Vec<f64> = f.values().iter().map(|v| c * v).collect();
            let lhs = lq_norm(&scaled, &grid, q).unwrap();
            let rhs = c.abs() * lq_norm(f.values(), &grid, q).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }
    }
}
