//! Constrained minimization of the discrete field energy
//! `E(u) = Σ_cells (1 - √(1 - |∇u|²)) h^N - Σ_nodes ρ u h^N`
//! over zero-trace grid fields with the per-cell gradient constraint.
//!
//! The method is first order by design: the energy's curvature blows up as
//! `v = √(1 - |∇u|²) → 0`, exactly the regime of interest, so Newton steps
//! are unreliable there. Descent steps use Barzilai-Borwein scaling with
//! Armijo backtracking; the line search rejects trial points whose cells
//! fall below the `v ≥ margin` slack.

use crate::grid::{
    cell_field_adjoint, cell_gradient_norms_sq, cell_gradients, gradient, sup_gradient_norm,
    BoxGrid, GridField,
};
use crate::poisson::{cg_solve, face_divergence_transpose};
use crate::special::{bump_profile, one_minus_sqrt_one_minus};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    Fixed,
    Backtracking,
}

/// Solver configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub max_iterations: usize,
    pub step_rule: StepRule,
    /// Initial step in nodal-value units; `None` picks `h²/(2N)`.
    pub initial_step: Option<f64>,
    /// Stop when the relative energy decrease falls below this.
    pub tolerance: f64,
    /// Additionally require the sup of the residual density to fall below
    /// this before stopping (when set).
    pub residual_tolerance: Option<f64>,
    /// Minimum admissible `v` per cell, in `[0, 0.1)`.
    pub margin: f64,
    /// Seed for the randomized test functions in the returned diagnostics.
    pub seed: u64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            step_rule: StepRule::Backtracking,
            initial_step: None,
            tolerance: 1e-12,
            residual_tolerance: None,
            margin: 1e-6,
            seed: 7,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if !(0.0..0.1).contains(&self.margin) {
            return Err(Error::InvalidParameter(format!(
                "margin {} outside [0, 0.1)",
                self.margin
            )));
        }
        Ok(())
    }
}

/// Result of a constrained minimization.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub field: GridField,
    pub energy: f64,
    pub iterations: usize,
    pub sup_gradient_norm: f64,
    pub energy_history: Vec<f64>,
    pub weak_residual: f64,
    /// False when the iteration cap was reached before the tolerance; the
    /// result is still valid, just flagged.
    pub converged: bool,
}

/// The discrete field energy. `I_ρ(0) = 0` holds bitwise.
pub fn energy(u: &GridField, rho_nodes: &[f64]) -> Result<f64> {
    let grid = u.grid();
    let dim = grid.dim();
    let hn = grid.cell_volume();
    let norms_sq = cell_gradient_norms_sq(&cell_gradients(u), dim);
    let mut field_term = 0.0;
    for (cell, &ns) in norms_sq.iter().enumerate() {
        if ns > 1.0 + 1e-10 {
            return Err(Error::ConstraintViolation(format!(
                "cell {cell} has |∇u|² = {ns} > 1"
            )));
        }
        field_term += one_minus_sqrt_one_minus(ns.min(1.0));
    }
    let coupling: f64 = rho_nodes
        .iter()
        .zip(u.values())
        .map(|(r, v)| r * v)
        .sum();
    Ok(field_term * hn - coupling * hn)
}

/// Per-cell flux `∇u/√(1-|∇u|²)`; errors when any cell has `v < margin`.
fn cell_flux(u: &GridField, margin: f64) -> Result<Vec<f64>> {
    let grid = u.grid();
    let dim = grid.dim();
    let mut grads = cell_gradients(u);
    let floor = margin.max(1e-14);
    for cell in 0..grid.cell_count() {
        let g = &mut grads[cell * dim..(cell + 1) * dim];
        let ns: f64 = g.iter().map(|x| x * x).sum();
        let v_sq = 1.0 - ns;
        if v_sq < floor * floor {
            return Err(Error::ConstraintViolation(format!(
                "cell {cell} has v = {} below margin {margin}",
                v_sq.max(0.0).sqrt()
            )));
        }
        let inv_v = 1.0 / v_sq.sqrt();
        for x in g {
            *x *= inv_v;
        }
    }
    Ok(grads)
}

/// Exact gradient of the discrete energy with respect to nodal values:
/// `h^N (div^T flux - ρ)` on interior nodes, zero on the (pinned) boundary.
pub fn energy_gradient(u: &GridField, rho_nodes: &[f64], margin: f64) -> Result<Vec<f64>> {
    let grid = u.grid();
    let hn = grid.cell_volume();
    let flux = cell_flux(u, margin)?;
    let mut out = cell_field_adjoint(grid, &flux);
    let mut coords = vec![0usize; grid.dim()];
    for (idx, slot) in out.iter_mut().enumerate() {
        grid.node_coords(idx, &mut coords);
        if grid.is_boundary_coords(&coords) {
            *slot = 0.0;
        } else {
            *slot = (*slot - rho_nodes[idx]) * hn;
        }
    }
    Ok(out)
}

/// Largest per-cell gradient norm of a nodal array (helper for feasibility).
fn worst_cell_norm(grid: &BoxGrid, values: &[f64]) -> f64 {
    let f = GridField::from_values_unchecked(*grid, values.to_vec());
    let ns = cell_gradient_norms_sq(&cell_gradients(&f), grid.dim());
    ns.into_iter().fold(0.0f64, f64::max).sqrt()
}

/// Project onto the admissible set `{per-cell |∇u| ≤ 1 - margin}` by
/// iterative face clipping with least-squares re-integration. Idempotent
/// (bitwise) on fields that already satisfy the constraint.
pub fn project_constraint(u: &GridField, margin: f64) -> Result<GridField> {
    let grid = *u.grid();
    let dim = grid.dim();
    let target = 1.0 - margin;
    let mut current = u.clone();
    for _sweep in 0..500 {
        let grads = cell_gradients(&current);
        let norms_sq = cell_gradient_norms_sq(&grads, dim);
        let mut worst = 0.0f64;
        let mut scales = vec![1.0f64; norms_sq.len()];
        for (cell, &ns) in norms_sq.iter().enumerate() {
            let norm = ns.sqrt();
            worst = worst.max(norm);
            if norm > target {
                scales[cell] = target / norm;
            }
        }
        if worst <= target + 1e-12 {
            return Ok(current);
        }
        // Scale each face difference by the most restrictive adjacent cell.
        let g = gradient(&current);
        let n = grid.points_per_axis();
        let nc = grid.cells_per_axis();
        let cell_strides = grid.cell_strides();
        let mut faces: Vec<Vec<f64>> = Vec::with_capacity(dim);
        for axis in 0..dim {
            let mut shape = vec![n; dim];
            shape[axis] = n - 1;
            let len: usize = shape.iter().product();
            let mut arr = vec![0.0f64; len];
            let mut fcoords = vec![0usize; dim];
            let mut cell = vec![0usize; dim];
            for (fidx, slot) in arr.iter_mut().enumerate() {
                let mut rem = fidx;
                for i in (0..dim).rev() {
                    fcoords[i] = rem % shape[i];
                    rem /= shape[i];
                }
                let mut lambda = 1.0f64;
                // Adjacent cells: k_axis = f_axis, k_j ∈ {f_j - 1, f_j}.
                let others: Vec<usize> = (0..dim).filter(|&j| j != axis).collect();
                for mask in 0..(1usize << others.len()) {
                    let mut ok = true;
                    cell[axis] = fcoords[axis];
                    for (bit, &j) in others.iter().enumerate() {
                        let k = if mask & (1 << bit) != 0 {
                            fcoords[j] as i64 - 1
                        } else {
                            fcoords[j] as i64
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
                    let cidx: usize =
                        cell.iter().zip(&cell_strides).map(|(c, s)| c * s).sum();
                    lambda = lambda.min(scales[cidx]);
                }
                *slot = lambda * g.component(axis)[fidx];
            }
            faces.push(arr);
        }
        // Least-squares potential recovery: DᵀD u = Dᵀ d.
        let rhs = face_divergence_transpose(&grid, &faces);
        let apply = |vals: &[f64]| -> Vec<f64> {
            crate::poisson::apply_face_laplacian(&grid, vals)
        };
        let x = cg_solve(
            apply,
            &rhs,
            current.values().to_vec(),
            1e-11,
            20 * grid.points_per_axis().pow(2),
        )?;
        current = GridField::from_values_unchecked(grid, x);
    }
    Err(Error::ProjectionStalled {
        sweeps: 500,
        worst: worst_cell_norm(&grid, current.values()),
    })
}

/// Projected-gradient descent with backtracking on the discrete energy.
///
/// The energy history is monotone nonincreasing; the returned field always
/// satisfies the constraint and `E ≤ 0` (the zero field is admissible).
pub fn minimize(
    rho_nodes: &[f64],
    grid: &BoxGrid,
    config: &EnergyConfig,
) -> Result<MinimizeResult> {
    minimize_from(&GridField::zeros(*grid), rho_nodes, grid, config)
}

/// As [`minimize`], from a caller-supplied admissible start.
pub fn minimize_from(
    start: &GridField,
    rho_nodes: &[f64],
    grid: &BoxGrid,
    config: &EnergyConfig,
) -> Result<MinimizeResult> {
    config.validate()?;
    if rho_nodes.len() != grid.node_count() {
        return Err(Error::InvalidGrid("density/grid size mismatch".into()));
    }
    let dim = grid.dim();
    let hn = grid.cell_volume();
    let h = grid.spacing();
    let feasible_norm_sq = 1.0 - config.margin * config.margin;

    let mut u = project_constraint(start, config.margin)?;
    let mut e = energy(&u, rho_nodes)?;
    let mut history = vec![e];
    let mut grad = energy_gradient(&u, rho_nodes, 0.0)?;
    // Residual density: gradient per unit volume (mesh-size independent).
    let res: Vec<f64> = grad.iter().map(|g| g / hn).collect();
    let mut res_sup = res.iter().fold(0.0f64, |m, &g| m.max(g.abs()));
    let mut step = config.initial_step.unwrap_or(h * h / (2.0 * dim as f64));
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
        let mut trial_vals: Vec<f64> = Vec::new();
        let mut e_trial = e;
        for _bt in 0..60 {
            trial_vals = u
                .values()
                .iter()
                .zip(&dir)
                .map(|(v, d)| v + t * d)
                .collect();
            // Feasibility: every cell must keep v ≥ margin.
            let f = GridField::from_values_unchecked(*grid, trial_vals.clone());
            let ns = cell_gradient_norms_sq(&cell_gradients(&f), dim);
            let feasible = ns.iter().all(|&s| s <= feasible_norm_sq);
            if feasible {
                e_trial = energy(&f, rho_nodes)?;
                let armijo =
                    e_trial <= e - 1e-4 * t * dir_norm_sq * hn + 1e-300;
                if armijo || config.step_rule == StepRule::Fixed {
                    accepted = true;
                    break;
                }
            }
            if config.step_rule == StepRule::Fixed {
                // A fixed step that violates the margin is still halved;
                // otherwise nothing would remain admissible.
                t *= 0.5;
                continue;
            }
            t *= 0.5;
        }
        if !accepted {
            // Step collapsed: the iterate sits against the constraint set.
            break;
        }
        let new_u = GridField::from_values_unchecked(*grid, trial_vals);
        let new_grad = energy_gradient(&new_u, rho_nodes, 0.0)?;
        // Barzilai-Borwein scaling for the next trial step.
        if config.step_rule == StepRule::Backtracking {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..new_grad.len() {
                let s = new_u.values()[i] - u.values()[i];
                let y = (new_grad[i] - grad[i]) / hn;
                ss += s * s;
                sy += s * y;
            }
            step = if sy > 0.0 {
                (ss / sy).clamp(1e-9 * h * h, 1e6)
            } else {
                t * 2.0
            };
        }
        let rel_dec = (e - e_trial).abs() / e_trial.abs().max(1e-300);
        u = new_u;
        e = e_trial;
        grad = new_grad;
        res_sup = grad.iter().fold(0.0f64, |m, &g| m.max((g / hn).abs()));
        history.push(e);
        let res_ok = config.residual_tolerance.map_or(true, |rt| res_sup < rt);
        if rel_dec < config.tolerance && res_ok {
            converged = true;
            break;
        }
    }

    let sup_norm = sup_gradient_norm(&gradient(&u));
    let tests = default_test_functions(grid, config.seed);
    let weak = weak_residual(&u, rho_nodes, &tests)
        .map(|r| r.residual)
        .unwrap_or(f64::NAN);
    let _ = res_sup;
    Ok(MinimizeResult {
        field: u,
        energy: e,
        iterations,
        sup_gradient_norm: sup_norm,
        energy_history: history,
        weak_residual: weak,
        converged,
    })
}

/// Weak-formulation diagnostics of a field against a battery of test
/// functions, plus the flux/coupling pair of the variational inequality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakResidualReport {
    /// `max_ψ |∫ ∇u·∇ψ/√(1-|∇u|²) - ∫ ρψ| / ‖ψ‖`.
    pub residual: f64,
    /// `∫ |∇u|²/√(1-|∇u|²)`.
    pub flux_pairing: f64,
    /// `∫ ρ u`.
    pub coupling: f64,
    /// `coupling - flux_pairing`; the variational inequality requires this
    /// to be nonnegative up to quadrature tolerance.
    pub defect: f64,
}

pub fn weak_residual(
    u: &GridField,
    rho_nodes: &[f64],
    tests: &[GridField],
) -> Result<WeakResidualReport> {
    let grid = u.grid();
    let dim = grid.dim();
    let hn = grid.cell_volume();
    let flux = cell_flux(u, 0.0).map_err(|_| {
        Error::ConstraintViolation("degenerate cell (v = 0) in weak residual".into())
    })?;
    let grads_u = cell_gradients(u);

    let mut residual = 0.0f64;
    for psi in tests {
        if psi.grid() != grid {
            return Err(Error::InvalidGrid("test function on a different grid".into()));
        }
        let gpsi = cell_gradients(psi);
        let mut pairing = 0.0;
        let mut norm_sq = 0.0;
        for i in 0..gpsi.len() {
            pairing += flux[i] * gpsi[i];
            norm_sq += gpsi[i] * gpsi[i];
        }
        let coupling: f64 = rho_nodes
            .iter()
            .zip(psi.values())
            .map(|(r, v)| r * v)
            .sum();
        let norm = (norm_sq * hn).sqrt();
        if norm > 0.0 {
            residual = residual.max((pairing * hn - coupling * hn).abs() / norm);
        }
    }

    let mut flux_pairing = 0.0;
    for i in 0..grads_u.len() {
        flux_pairing += flux[i] * grads_u[i];
    }
    flux_pairing *= hn;
    let coupling: f64 = rho_nodes
        .iter()
        .zip(u.values())
        .map(|(r, v)| r * v)
        .sum::<f64>()
        * hn;
    let _ = dim;
    Ok(WeakResidualReport {
        residual,
        flux_pairing,
        coupling,
        defect: coupling - flux_pairing,
    })
}

/// The default battery: nodal hat functions at a fixed set of interior
/// nodes plus three seeded smooth bumps (local and global scales).
pub fn default_test_functions(grid: &BoxGrid, seed: u64) -> Vec<GridField> {
    let dim = grid.dim();
    let n = grid.points_per_axis();
    let mut tests = Vec::new();
    // Hats at the center and at quarter points along the first two axes.
    let mut anchors = vec![vec![n / 2; dim]];
    for axis in 0..dim.min(2) {
        let mut a = vec![n / 2; dim];
        a[axis] = n / 4;
        anchors.push(a.clone());
        a[axis] = 3 * n / 4;
        anchors.push(a);
    }
    let strides = grid.node_strides();
    for a in anchors {
        let mut vals = vec![0.0; grid.node_count()];
        let idx: usize = a.iter().zip(&strides).map(|(c, s)| c * s).sum();
        vals[idx] = 1.0;
        tests.push(GridField::from_values_unchecked(*grid, vals));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ell = grid.extent();
    for _ in 0..3 {
        let center: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5 * ell..0.5 * ell)).collect();
        let radius = rng.gen_range(0.25 * ell..0.5 * ell);
        tests.push(GridField::from_fn(*grid, |x| {
            let r: f64 = x
                .iter()
                .zip(&center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            bump_profile(r / radius)
        }));
    }
    tests
}
