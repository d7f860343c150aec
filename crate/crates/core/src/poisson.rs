//! Matrix-free conjugate gradients for the two discrete Laplacians the
//! solvers need: the averaged-gradient form `GᵀG` (the linearization of the
//! energy at zero) and the plain face-difference form `DᵀD` (least-squares
//! re-integration of face data). Both are symmetric positive definite on
//! interior nodes with the zero boundary condition.

use crate::grid::{cell_field_adjoint, cell_gradients, BoxGrid, GridField};
use crate::{Error, Result};
use rayon::prelude::*;

/// `A u = adjoint(G u)`: the averaged-gradient Laplacian.
pub fn apply_averaged_laplacian(grid: &BoxGrid, u: &GridField) -> Vec<f64> {
    cell_field_adjoint(grid, &cell_gradients(u))
}

/// `DᵀD u` with forward face differences (the standard 2N+1 point stencil).
pub fn apply_face_laplacian(grid: &BoxGrid, values: &[f64]) -> Vec<f64> {
    let dim = grid.dim();
    let h = grid.spacing();
    let strides = grid.node_strides();
    let mut out = vec![0.0f64; grid.node_count()];
    out.par_iter_mut().enumerate().for_each(|(p, slot)| {
        let mut coords = vec![0usize; dim];
        grid.node_coords(p, &mut coords);
        if grid.is_boundary_coords(&coords) {
            return;
        }
        let mut acc = 0.0;
        for i in 0..dim {
            let s = strides[i];
            acc += 2.0 * values[p] - values[p + s] - values[p - s];
        }
        *slot = acc / (h * h);
    });
    out
}

/// `Dᵀ d` for face data `d` (per-axis arrays shaped like gradient faces).
pub fn face_divergence_transpose(grid: &BoxGrid, faces: &[Vec<f64>]) -> Vec<f64> {
    let dim = grid.dim();
    let h = grid.spacing();
    let n = grid.points_per_axis();
    // Strides of the per-axis face arrays.
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
    let mut out = vec![0.0f64; grid.node_count()];
    out.par_iter_mut().enumerate().for_each(|(p, slot)| {
        let mut coords = vec![0usize; dim];
        grid.node_coords(p, &mut coords);
        if grid.is_boundary_coords(&coords) {
            return;
        }
        let mut acc = 0.0;
        for i in 0..dim {
            let fs = &face_strides[i];
            let mut base = 0usize;
            for j in 0..dim {
                if j != i {
                    base += coords[j] * fs[j];
                }
            }
            // Incoming face (tail p - e_i) minus outgoing face (tail p).
            acc += faces[i][base + (coords[i] - 1) * fs[i]];
            acc -= faces[i][base + coords[i] * fs[i]];
        }
        *slot = acc / h;
    });
    out
}

/// Conjugate gradients for an SPD operator on nodal arrays (boundary pinned
/// to zero). Returns the solution; relative residual target `tol`.
pub fn cg_solve<A>(
    apply: A,
    rhs: &[f64],
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>>
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut x = x0;
    let ax = apply(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let rhs_norm = dot(rhs, rhs).sqrt().max(1e-300);
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    if rs.sqrt() <= tol * rhs_norm {
        return Ok(x);
    }
    for _ in 0..max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::QuadratureFailure(
                "CG operator lost positive definiteness".into(),
            ));
        }
        let alpha = rs / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        if rs_new.sqrt() <= tol * rhs_norm {
            return Ok(x);
        }
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::QuadratureFailure(format!(
        "CG did not converge in {max_iter} iterations (residual {:.3e})",
        rs.sqrt() / rhs_norm
    )))
}

/// Solve the discrete Poisson problem `GᵀG u = rhs` (interior nodes).
pub fn solve_poisson(grid: &BoxGrid, rhs: &[f64], tol: f64) -> Result<GridField> {
    let mut rhs_masked = rhs.to_vec();
    let mut coords = vec![0usize; grid.dim()];
    for (idx, v) in rhs_masked.iter_mut().enumerate() {
        grid.node_coords(idx, &mut coords);
        if grid.is_boundary_coords(&coords) {
            *v = 0.0;
        }
    }
    let apply = |vals: &[f64]| -> Vec<f64> {
        let f = GridField::from_values_unchecked(*grid, vals.to_vec());
        apply_averaged_laplacian(grid, &f)
    };
    let x = cg_solve(
        apply,
        &rhs_masked,
        vec![0.0; grid.node_count()],
        tol,
        10 * grid.points_per_axis() * grid.points_per_axis(),
    )?;
    GridField::from_values(*grid, x)
}
