//! Solvers for the discrete boundary-value problems: Dirichlet, Neumann,
//! the Tresca friction variational inequality (switching and proximal
//! algorithms), sign-constrained variational inequalities and the vector
//! Neumann problem used for descent directions.
//!
//! All of them minimize quadratic energies built from the H1 operator
//! K + M; the nonsmooth friction term is always the node-lumped
//! sum_b c_b |v(b)| from `fem::boundary_lumped_weights`.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::fem::{self, ScalarField, VectorField};
use crate::mesh::Mesh;
use crate::sparse::{self, SparseMatrix};

/// Per-boundary-node contact state of a Tresca solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    /// u = 0, |flux| <= g.
    Stick,
    /// u > 0, flux = -g.
    SlipPlus,
    /// u < 0, flux = +g.
    SlipMinus,
}

/// Nodal constraint for the sign-constrained variational inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Free,
    Eq0,
    Le0,
    Ge0,
}

/// Outcome of a Tresca solve.
#[derive(Debug, Clone)]
pub struct TrescaSolveReport {
    pub outer_iterations: usize,
    pub status: Vec<Status>,
    pub converged: bool,
    /// The switching iteration cycled or stalled and the proximal solver
    /// produced the certified answer.
    pub converged_by_fallback: bool,
    /// Value of E(u) = 1/2 u'Au - L'u + sum_b c_b |u_b| at the solution.
    pub energy: f64,
    pub max_complementarity: f64,
}

impl TrescaSolveReport {
    pub fn status_counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for s in &self.status {
            match s {
                Status::Stick => c.0 += 1,
                Status::SlipPlus => c.1 += 1,
                Status::SlipMinus => c.2 += 1,
            }
        }
        c
    }
}

/// Iteration controls shared by the solvers in this module.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Relative residual target of the inner conjugate-gradient solves.
    pub cg_tol: f64,
    pub cg_maxit: usize,
    /// Variational-inequality tolerance (complementarity, energy decrease).
    pub tol: f64,
    /// Outer iteration cap (switching sweeps, proximal iterations,
    /// active-set updates).
    pub maxit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { cg_tol: 1e-12, cg_maxit: 100_000, tol: 1e-10, maxit: 100_000 }
    }
}

/// Assembled data of one Tresca problem: operator, load and the lumped
/// friction coefficients (boundary-node indexed).
pub struct TrescaSystem {
    pub matrix: SparseMatrix,
    pub load: Vec<f64>,
    pub lumped: Vec<f64>,
}

impl TrescaSystem {
    /// The unperturbed problem: A = K + M, L = M f, c_b = g(b) w_b.
    pub fn standard(mesh: &Mesh, f: &ScalarField, g: &ScalarField) -> Result<TrescaSystem> {
        Ok(TrescaSystem {
            matrix: fem::h1_matrix(mesh),
            load: fem::assemble_load(mesh, f)?,
            lumped: fem::boundary_lumped_weights(mesh, g)?,
        })
    }

    pub fn energy(&self, mesh: &Mesh, u: &[f64]) -> f64 {
        let quad = 0.5 * self.matrix.quadratic(u, u) - sparse::dot(&self.load, u);
        let friction: f64 = mesh
            .boundary_nodes()
            .iter()
            .enumerate()
            .map(|(p, &b)| self.lumped[p] * u[b].abs())
            .sum();
        quad + friction
    }
}

/// Discrete solution of -lap u + u = f with u = 0 on the whole boundary
/// (rows eliminated symmetrically).
pub fn solve_dirichlet(mesh: &Mesh, f: &ScalarField, opts: &SolverOptions) -> Result<ScalarField> {
    let a = fem::h1_matrix(mesh);
    let mut rhs = fem::assemble_load(mesh, f)?;
    for &b in mesh.boundary_nodes() {
        rhs[b] = 0.0;
    }
    let elim = a.eliminate_rows(mesh.boundary_nodes());
    let u = sparse::solve_spd(&elim, &rhs, opts.cg_tol, opts.cg_maxit)?;
    ScalarField::from_values(mesh, u)
}

/// Discrete solution of -lap u + u = f with du/dn = g_n, the Neumann data
/// entering through the lumped boundary functional (g_n indexed like
/// `boundary_nodes`).
pub fn solve_neumann(
    mesh: &Mesh,
    f: &ScalarField,
    g_n: &[f64],
    opts: &SolverOptions,
) -> Result<ScalarField> {
    if g_n.len() != mesh.boundary_nodes().len() {
        return Err(Error::MeshMismatch(format!(
            "Neumann data has {} entries for {} boundary nodes",
            g_n.len(),
            mesh.boundary_nodes().len()
        )));
    }
    let a = fem::h1_matrix(mesh);
    let mut rhs = fem::assemble_load(mesh, f)?;
    let w = fem::boundary_weights(mesh);
    for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
        rhs[b] += g_n[p] * w[p];
    }
    let u = sparse::solve_spd(&a, &rhs, opts.cg_tol, opts.cg_maxit)?;
    ScalarField::from_values(mesh, u)
}

/// Tresca solve by the switching algorithm with the proximal solver as a
/// guaranteed fallback on cycling.
pub fn solve_tresca_switching(
    mesh: &Mesh,
    f: &ScalarField,
    g: &ScalarField,
    init: Option<&[Status]>,
    opts: &SolverOptions,
) -> Result<(ScalarField, TrescaSolveReport)> {
    let sys = TrescaSystem::standard(mesh, f, g)?;
    let (u, report) = solve_tresca_system(mesh, &sys, init, opts)?;
    Ok((ScalarField::from_values(mesh, u)?, report))
}

/// Tresca solve by accelerated proximal gradient only.
pub fn solve_tresca_proximal(
    mesh: &Mesh,
    f: &ScalarField,
    g: &ScalarField,
    opts: &SolverOptions,
) -> Result<ScalarField> {
    let sys = TrescaSystem::standard(mesh, f, g)?;
    let (u, _energies) = proximal_core(mesh, &sys, opts)?;
    ScalarField::from_values(mesh, u)
}

/// Switching iteration on an assembled system. Statuses start all-stick
/// unless `init` is given; each sweep solves the linear problem implied by
/// the statuses, recovers the stick multipliers, and flips the nodes whose
/// Tresca conditions are violated. Terminates at a fixed point. On cycling
/// or exhaustion the proximal solver takes over (`converged_by_fallback`).
pub fn solve_tresca_system(
    mesh: &Mesh,
    sys: &TrescaSystem,
    init: Option<&[Status]>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, TrescaSolveReport)> {
    let nb = mesh.boundary_nodes().len();
    if sys.lumped.len() != nb {
        return Err(Error::MeshMismatch("lumped coefficients do not match the boundary".into()));
    }
    let weights = fem::boundary_weights(mesh);
    let mut status: Vec<Status> = match init {
        Some(s) if s.len() == nb => s.to_vec(),
        Some(_) => return Err(Error::MeshMismatch("status vector does not match boundary".into())),
        None => vec![Status::Stick; nb],
    };
    let eps = 1e-10;
    let mut seen: HashSet<Vec<Status>> = HashSet::new();
    seen.insert(status.clone());
    let outer_cap = opts.maxit.min(if nb > 0 { 4 * nb + 20 } else { 20 });

    for outer in 1..=outer_cap {
        let u = solve_with_status(mesh, sys, &status, opts)?;
        let mut s = sys.matrix.mul(&u);
        for (si, li) in s.iter_mut().zip(&sys.load) {
            *si -= li;
        }
        let eps_u = 1e-12 * (1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let mut next = status.clone();
        for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
            let gb = sys.lumped[p] / weights[p];
            match status[p] {
                Status::Stick => {
                    let q = s[b] / weights[p];
                    if q > gb + eps {
                        next[p] = Status::SlipMinus;
                    } else if q < -gb - eps {
                        next[p] = Status::SlipPlus;
                    }
                }
                Status::SlipPlus => {
                    if u[b] < -eps_u {
                        next[p] = Status::Stick;
                    }
                }
                Status::SlipMinus => {
                    if u[b] > eps_u {
                        next[p] = Status::Stick;
                    }
                }
            }
        }
        if next == status {
            let max_comp = complementarity(mesh, sys, &weights, &status, &u, &s);
            let energy = sys.energy(mesh, &u);
            return Ok((
                u,
                TrescaSolveReport {
                    outer_iterations: outer,
                    status,
                    converged: max_comp <= opts.tol.max(1e-8),
                    converged_by_fallback: false,
                    energy,
                    max_complementarity: max_comp,
                },
            ));
        }
        if !seen.insert(next.clone()) {
            break; // cycling: hand over to the proximal solver
        }
        status = next;
    }

    let (u, _energies) = proximal_core(mesh, sys, opts)?;
    let s = {
        let mut s = sys.matrix.mul(&u);
        for (si, li) in s.iter_mut().zip(&sys.load) {
            *si -= li;
        }
        s
    };
    let status = status_from_solution(mesh, &u);
    let max_comp = complementarity(mesh, sys, &weights, &status, &u, &s);
    let energy = sys.energy(mesh, &u);
    Ok((
        u,
        TrescaSolveReport {
            outer_iterations: outer_cap,
            status,
            converged: max_comp <= opts.tol.max(1e-8),
            converged_by_fallback: true,
            energy,
            max_complementarity: max_comp,
        },
    ))
}

fn status_from_solution(mesh: &Mesh, u: &[f64]) -> Vec<Status> {
    let eps_u = 1e-12 * (1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    mesh.boundary_nodes()
        .iter()
        .map(|&b| {
            if u[b] > eps_u {
                Status::SlipPlus
            } else if u[b] < -eps_u {
                Status::SlipMinus
            } else {
                Status::Stick
            }
        })
        .collect()
}

fn solve_with_status(
    mesh: &Mesh,
    sys: &TrescaSystem,
    status: &[Status],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let mut rhs = sys.load.clone();
    let mut stick_vertices = Vec::new();
    for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
        match status[p] {
            Status::Stick => {
                stick_vertices.push(b);
                rhs[b] = 0.0;
            }
            Status::SlipPlus => rhs[b] -= sys.lumped[p],
            Status::SlipMinus => rhs[b] += sys.lumped[p],
        }
    }
    let a = sys.matrix.eliminate_rows(&stick_vertices);
    sparse::solve_spd(&a, &rhs, opts.cg_tol, opts.cg_maxit)
}

/// Max complementarity violation: friction-cone violation (in c units) at
/// stick nodes, sign violation (in u units) at slip nodes.
fn complementarity(
    mesh: &Mesh,
    sys: &TrescaSystem,
    weights: &[f64],
    status: &[Status],
    u: &[f64],
    flux_times_weight: &[f64],
) -> f64 {
    let _ = weights;
    let mut worst: f64 = 0.0;
    for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
        let v = match status[p] {
            Status::Stick => (sys.lumped[p] - flux_times_weight[b].abs()).min(0.0).abs(),
            Status::SlipPlus => (-u[b]).max(0.0),
            Status::SlipMinus => u[b].max(0.0),
        };
        worst = worst.max(v);
    }
    worst
}

/// FISTA with energy-based restart on E(v) = 1/2 v'Av - L'v + sum c_b|v_b|.
/// The proximal map soft-thresholds the boundary entries and leaves
/// interior entries at the gradient step. Returns the iterate and the
/// (non-increasing) energy trace.
pub(crate) fn proximal_core(
    mesh: &Mesh,
    sys: &TrescaSystem,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = sys.matrix.dim();
    let step = 1.0 / sys.matrix.spectral_bound();
    let nb = mesh.boundary_nodes().len();

    let take_step = |y: &[f64]| -> Vec<f64> {
        let mut x = sys.matrix.mul(y);
        for i in 0..n {
            x[i] = y[i] - step * (x[i] - sys.load[i]);
        }
        for p in 0..nb {
            let b = mesh.boundary_nodes()[p];
            let thr = step * sys.lumped[p];
            x[b] = x[b].signum() * (x[b].abs() - thr).max(0.0);
        }
        x
    };

    let mut x = vec![0.0; n];
    let mut y = x.clone();
    let mut theta = 1.0f64;
    let mut e_prev = sys.energy(mesh, &x);
    let mut energies = vec![e_prev];

    for it in 0..opts.maxit {
        let mut x_new = take_step(&y);
        let mut e_new = sys.energy(mesh, &x_new);
        if e_new > e_prev {
            // restart momentum; a plain proximal step from x cannot increase E
            y = x.clone();
            theta = 1.0;
            x_new = take_step(&y);
            e_new = sys.energy(mesh, &x_new);
        }
        let dx = x_new
            .iter()
            .zip(&x)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = 1.0 + x_new.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let de = (e_prev - e_new).abs();

        let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_new;
        y = x_new
            .iter()
            .zip(&x)
            .map(|(xn, xo)| xn + beta * (xn - xo))
            .collect();
        theta = theta_new;
        x = x_new;
        e_prev = e_new;
        energies.push(e_new);

        if de <= opts.tol * (1.0 + e_new.abs()) && dx <= opts.tol * scale {
            let _ = it;
            return Ok((x, energies));
        }
    }
    let gap = energies
        .iter()
        .rev()
        .take(2)
        .fold((0.0, None::<f64>), |(d, last), &e| match last {
            None => (d, Some(e)),
            Some(l) => ((l - e).abs(), Some(e)),
        })
        .0;
    Err(Error::ViSolver(format!(
        "proximal solver exhausted {} iterations, last energy decrease {gap:e}",
        opts.maxit
    )))
}

/// Per-boundary-node residual of the Tresca law
/// max(|q| - g, 0) + |u q + g |u||, with q the recovered flux.
pub fn check_tresca_law(
    mesh: &Mesh,
    u: &ScalarField,
    f: &ScalarField,
    g: &ScalarField,
) -> Result<Vec<f64>> {
    u.check_mesh(mesh)?;
    g.check_mesh(mesh)?;
    let a = fem::h1_matrix(mesh);
    let load = fem::assemble_load(mesh, f)?;
    let q = fem::recover_boundary_flux(mesh, &a, &load, u.values());
    Ok(mesh
        .boundary_nodes()
        .iter()
        .enumerate()
        .map(|(p, &b)| {
            let gb = g.values()[b];
            let ub = u.values()[b];
            (q[p].abs() - gb).max(0.0) + (ub * q[p] + gb * ub.abs()).abs()
        })
        .collect())
}

/// Minimize 1/2 v'(K+M)v - rhs'v subject to the nodal sign constraints on
/// boundary nodes, by a primal active-set iteration. Bound nodes in the
/// working set are treated as equalities; multiplier signs and constraint
/// violations drive the update; terminates when the working set is stable
/// (KKT point).
pub fn solve_constrained_vi(
    mesh: &Mesh,
    rhs: &[f64],
    constraints: &[Constraint],
    opts: &SolverOptions,
) -> Result<ScalarField> {
    let a = fem::h1_matrix(mesh);
    let u = constrained_vi_active_set(mesh, &a, rhs, constraints, opts)?;
    ScalarField::from_values(mesh, u)
}

pub(crate) fn constrained_vi_active_set(
    mesh: &Mesh,
    a: &SparseMatrix,
    rhs: &[f64],
    constraints: &[Constraint],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let nb = mesh.boundary_nodes().len();
    if constraints.len() != nb {
        return Err(Error::MeshMismatch(format!(
            "{} constraints for {} boundary nodes",
            constraints.len(),
            nb
        )));
    }
    if rhs.len() != a.dim() {
        return Err(Error::MeshMismatch("rhs length does not match the operator".into()));
    }
    // start with every inequality active: matches the all-stick start of the
    // switching solver and is exact when the data vanishes
    let mut active: Vec<bool> = constraints.iter().map(|c| !matches!(c, Constraint::Free)).collect();
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    seen.insert(active.clone());
    let scale = 1e-14 * (1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())));

    for _ in 0..opts.maxit.min(4 * nb + 20) {
        let mut fixed = Vec::new();
        let mut sys_rhs = rhs.to_vec();
        for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
            if active[p] {
                fixed.push(b);
                sys_rhs[b] = 0.0;
            }
        }
        let elim = a.eliminate_rows(&fixed);
        let v = sparse::solve_spd(&elim, &sys_rhs, opts.cg_tol, opts.cg_maxit)?;
        let mut r = a.mul(&v);
        for (ri, fi) in r.iter_mut().zip(rhs) {
            *ri -= fi;
        }
        let mut next = active.clone();
        for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
            match constraints[p] {
                Constraint::Free => {}
                Constraint::Eq0 => next[p] = true,
                // v <= 0: multiplier lambda = -r_b >= 0; primal-dual rule
                Constraint::Le0 => next[p] = v[b] - r[b] > scale,
                // v >= 0: multiplier nu = r_b >= 0
                Constraint::Ge0 => next[p] = r[b] - v[b] > scale,
            }
        }
        if next == active {
            return Ok(v);
        }
        if !seen.insert(next.clone()) {
            return Err(Error::ViSolver("active-set iteration cycled".into()));
        }
        active = next;
    }
    Err(Error::ViSolver("active-set iteration exhausted its budget".into()))
}

/// Projected accelerated gradient for the same constrained problem; slower
/// but independent of the active-set path, used to validate it.
pub fn solve_constrained_vi_projected(
    mesh: &Mesh,
    rhs: &[f64],
    constraints: &[Constraint],
    opts: &SolverOptions,
) -> Result<ScalarField> {
    let a = fem::h1_matrix(mesh);
    let n = a.dim();
    let step = 1.0 / a.spectral_bound();
    let project = |x: &mut Vec<f64>| {
        for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
            x[b] = match constraints[p] {
                Constraint::Free => x[b],
                Constraint::Eq0 => 0.0,
                Constraint::Le0 => x[b].min(0.0),
                Constraint::Ge0 => x[b].max(0.0),
            };
        }
    };
    let energy = |x: &[f64]| 0.5 * a.quadratic(x, x) - sparse::dot(rhs, x);
    let take_step = |y: &[f64]| {
        let mut x: Vec<f64> = a.mul(y);
        for i in 0..n {
            x[i] = y[i] - step * (x[i] - rhs[i]);
        }
        project(&mut x);
        x
    };

    let mut x = vec![0.0; n];
    project(&mut x);
    let mut y = x.clone();
    let mut theta = 1.0f64;
    let mut e_prev = energy(&x);
    for _ in 0..opts.maxit {
        let mut x_new = take_step(&y);
        let mut e_new = energy(&x_new);
        if e_new > e_prev {
            y = x.clone();
            theta = 1.0;
            x_new = take_step(&y);
            e_new = energy(&x_new);
        }
        let dx = x_new.iter().zip(&x).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        let scale = 1.0 + x_new.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let de = (e_prev - e_new).abs();
        let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_new;
        y = x_new.iter().zip(&x).map(|(xn, xo)| xn + beta * (xn - xo)).collect();
        theta = theta_new;
        x = x_new;
        e_prev = e_new;
        if de <= opts.tol * (1.0 + e_new.abs()) && dx <= opts.tol * scale {
            return ScalarField::from_values(mesh, x);
        }
    }
    Err(Error::ViSolver("projected gradient exhausted its budget".into()))
}

/// Componentwise H1 solves a(V_i, w) = sum_b rho(b) n_i(b) w_b w(b):
/// the discrete vector Neumann problem -lap V + V = 0, grad(V) n = rho n.
pub fn solve_vector_neumann(mesh: &Mesh, rho: &[f64], opts: &SolverOptions) -> Result<VectorField> {
    let nb = mesh.boundary_nodes().len();
    if rho.len() != nb {
        return Err(Error::MeshMismatch(format!("{} densities for {nb} boundary nodes", rho.len())));
    }
    let geo = mesh.boundary_geometry(crate::mesh::CurvatureMethod::Osculating)?;
    let a = fem::h1_matrix(mesh);
    let mut comp = [vec![0.0; mesh.num_vertices()], vec![0.0; mesh.num_vertices()]];
    for i in 0..2 {
        let mut rhs = vec![0.0; mesh.num_vertices()];
        for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
            rhs[b] = rho[p] * geo.normal[p][i] * geo.weight[p];
        }
        comp[i] = sparse::solve_spd(&a, &rhs, opts.cg_tol, opts.cg_maxit)?;
    }
    let values: Vec<[f64; 2]> =
        (0..mesh.num_vertices()).map(|v| [comp[0][v], comp[1][v]]).collect();
    VectorField::from_values(mesh, values)
}
