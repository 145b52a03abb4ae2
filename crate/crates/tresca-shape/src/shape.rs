//! Shape calculus for the Tresca energy: boundary classification, energy
//! functionals, the shape gradient in volume and boundary form, pullback
//! coefficients for the fixed-domain perturbed problem, material and shape
//! directional derivatives, and their finite-difference ladders.

use crate::error::{Error, Result};
use crate::fem::{self, ScalarField, SmoothField, Sym2, VectorField};
use crate::mesh::{BoundaryGeometry, Mesh};
use crate::sparse;
use crate::vi::{self, Constraint, SolverOptions, TrescaSolveReport, TrescaSystem};

/// Regime of a boundary node relative to the friction bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryClass {
    /// |u| > eps_u: the trace is free and the flux sits on the bound.
    N,
    /// u = 0 with |q| strictly inside (-g, g).
    D,
    /// u = 0 with q at +g: u may only decrease.
    SMinus,
    /// u = 0 with q at -g: u may only increase.
    SPlus,
}

/// Labels for every boundary node plus the tolerances that produced them.
#[derive(Debug, Clone)]
pub struct BoundaryClassification {
    pub labels: Vec<BoundaryClass>,
    pub eps_u: f64,
    pub eps_g: f64,
}

impl BoundaryClassification {
    pub fn counts(&self) -> (usize, usize, usize, usize) {
        let mut c = (0, 0, 0, 0);
        for l in &self.labels {
            match l {
                BoundaryClass::N => c.0 += 1,
                BoundaryClass::D => c.1 += 1,
                BoundaryClass::SMinus => c.2 += 1,
                BoundaryClass::SPlus => c.3 += 1,
            }
        }
        c
    }

    /// Constraint set of the material-derivative variational inequality.
    pub fn constraints(&self) -> Vec<Constraint> {
        self.labels
            .iter()
            .map(|l| match l {
                BoundaryClass::N => Constraint::Free,
                BoundaryClass::D => Constraint::Eq0,
                BoundaryClass::SMinus => Constraint::Le0,
                BoundaryClass::SPlus => Constraint::Ge0,
            })
            .collect()
    }
}

/// Default tolerances: 1e-6 of the data scales.
pub fn default_classification_eps(u: &ScalarField, g: &ScalarField) -> (f64, f64) {
    let umax = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gmax = g.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (1e-6 * umax.max(1e-300), 1e-6 * gmax.max(1e-300))
}

/// Partition the boundary nodes by the Tresca solution's trace and flux.
pub fn classify_boundary(
    mesh: &Mesh,
    u: &ScalarField,
    q: &[f64],
    g: &ScalarField,
    eps_u: f64,
    eps_g: f64,
) -> Result<BoundaryClassification> {
    u.check_mesh(mesh)?;
    g.check_mesh(mesh)?;
    if q.len() != mesh.boundary_nodes().len() {
        return Err(Error::MeshMismatch("flux vector does not match the boundary".into()));
    }
    let labels = mesh
        .boundary_nodes()
        .iter()
        .enumerate()
        .map(|(p, &b)| {
            let ub = u.values()[b];
            let gb = g.values()[b];
            if ub.abs() > eps_u {
                BoundaryClass::N
            } else if q[p] >= gb - eps_g {
                BoundaryClass::SMinus
            } else if q[p] <= -gb + eps_g {
                BoundaryClass::SPlus
            } else {
                BoundaryClass::D
            }
        })
        .collect();
    Ok(BoundaryClassification { labels, eps_u, eps_g })
}

/// E(u) = 1/2 u'(K+M)u + sum_b c_b |u_b| - L'u, the discrete Tresca energy.
pub fn tresca_energy(mesh: &Mesh, u: &ScalarField, f: &ScalarField, g: &ScalarField) -> Result<f64> {
    u.check_mesh(mesh)?;
    let sys = TrescaSystem::standard(mesh, f, g)?;
    Ok(sys.energy(mesh, u.values()))
}

/// -1/2 ||u||^2_H1: equals the Tresca energy at the discrete solution.
pub fn compliance_energy(mesh: &Mesh, u: &ScalarField) -> Result<f64> {
    u.check_mesh(mesh)?;
    let a = fem::h1_matrix(mesh);
    Ok(-0.5 * a.quadratic(u.values(), u.values()))
}

/// Dirichlet energy J_D = 1/2 ||w||^2_H1 - (f, w) and its solution.
pub fn dirichlet_energy(
    mesh: &Mesh,
    f: &ScalarField,
    opts: &SolverOptions,
) -> Result<(f64, ScalarField)> {
    let w = vi::solve_dirichlet(mesh, f, opts)?;
    let a = fem::h1_matrix(mesh);
    let load = fem::assemble_load(mesh, f)?;
    let j = 0.5 * a.quadratic(w.values(), w.values()) - sparse::dot(&load, w.values());
    Ok((j, w))
}

/// Neumann energy J_N = 1/2 ||w||^2_H1 + sum_b c_b w_b - (f, w) for the
/// solution with flux data -g, lumped boundary quadrature throughout.
pub fn neumann_energy(
    mesh: &Mesh,
    f: &ScalarField,
    g: &ScalarField,
    opts: &SolverOptions,
) -> Result<(f64, ScalarField)> {
    let lumped = fem::boundary_lumped_weights(mesh, g)?;
    let weights = fem::boundary_weights(mesh);
    let data: Vec<f64> = lumped.iter().zip(&weights).map(|(c, w)| -c / w).collect();
    let w = vi::solve_neumann(mesh, f, &data, opts)?;
    let a = fem::h1_matrix(mesh);
    let load = fem::assemble_load(mesh, f)?;
    let mut j = 0.5 * a.quadratic(w.values(), w.values()) - sparse::dot(&load, w.values());
    for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
        j += lumped[p] * w.values()[b];
    }
    Ok((j, w))
}

/// Area-weighted average of the element Jacobians of `v` at each vertex,
/// rows indexed by component: out[i][j] = d v_i / d x_j.
fn node_velocity_gradient(mesh: &Mesh, v: &VectorField) -> Vec<[[f64; 2]; 2]> {
    let vx: Vec<f64> = v.values().iter().map(|w| w[0]).collect();
    let vy: Vec<f64> = v.values().iter().map(|w| w[1]).collect();
    let gx = fem::node_gradient_raw(mesh, &vx);
    let gy = fem::node_gradient_raw(mesh, &vy);
    (0..mesh.num_vertices()).map(|i| [gx[i], gy[i]]).collect()
}

/// Assembled linear functional G with G . W = shape_gradient_volume(W) for
/// every nodal field W: the Riesz-ready form of the volume expression.
///
/// The integrand is the energy shape gradient with the strong equation
/// substituted for the Laplacian (lap u = u - f) and the friction law for
/// the boundary product (u dn(u) = -g |u|); velocity gradients come from
/// the P1 interpolant per element, boundary integrals are node-lumped with
/// the tangential divergence node-averaged.
pub fn shape_gradient_functional(
    mesh: &Mesh,
    u: &ScalarField,
    f: &dyn SmoothField,
    g: &dyn SmoothField,
) -> Result<Vec<[f64; 2]>> {
    u.check_mesh(mesh)?;
    let uv = u.values();
    let mut grad = vec![[0.0; 2]; mesh.num_vertices()];

    for t in 0..mesh.triangles().len() {
        let (area, grads) = fem::element_geometry(mesh, t);
        let tri = mesh.triangles()[t];
        let mut gu = [0.0; 2];
        for c in 0..3 {
            gu[0] += uv[tri[c]] * grads[c][0];
            gu[1] += uv[tri[c]] * grads[c][1];
        }
        let gu2 = gu[0] * gu[0] + gu[1] * gu[1];
        // nodal values of u - f on this element
        let mut w = [0.0; 3];
        for c in 0..3 {
            w[c] = uv[tri[c]] - f.value(mesh.vertices()[tri[c]]);
        }
        for m in 0..3 {
            // 1/2 div(V) |grad u|^2  and  - grad u . (grad V grad u)
            let dot_mu = grads[m][0] * gu[0] + grads[m][1] * gu[1];
            grad[tri[m]][0] += area * (0.5 * gu2 * grads[m][0] - dot_mu * gu[0]);
            grad[tri[m]][1] += area * (0.5 * gu2 * grads[m][1] - dot_mu * gu[1]);
            // - int (u - f) V . grad u  with the exact P1 product rule
            let s: f64 = (0..3).map(|l| w[l] * if l == m { 2.0 } else { 1.0 }).sum();
            let s = s * area / 12.0;
            grad[tri[m]][0] -= s * gu[0];
            grad[tri[m]][1] -= s * gu[1];
        }
    }

    let geo = mesh.boundary_geometry(crate::mesh::CurvatureMethod::Osculating)?;
    for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
        let x = mesh.vertices()[b];
        let ub = uv[b];
        let fb = f.value(x);
        let gb = g.value(x);
        let wb = geo.weight[p];
        let n = geo.normal[p];
        // V.n (u^2/2 - f u)
        let c = wb * (0.5 * ub * ub - fb * ub);
        grad[b][0] += c * n[0];
        grad[b][1] += c * n[1];
        // (grad g . V) |u| from the friction-law substitution
        let dg = g.gradient(x);
        grad[b][0] += wb * ub.abs() * dg[0];
        grad[b][1] += wb * ub.abs() * dg[1];
        // g |u| div_G(V), with div_G(V) = div V - n . (grad V) n node-averaged
        let scale = wb * gb * ub.abs();
        if scale != 0.0 {
            let total: f64 = mesh.vertex_triangles(b).iter().map(|&t| mesh.triangle_area(t)).sum();
            for &t in mesh.vertex_triangles(b) {
                let (area, grads) = fem::element_geometry(mesh, t);
                let tri = mesh.triangles()[t];
                let frac = area / total;
                for m in 0..3 {
                    let gm = grads[m];
                    let gm_n = gm[0] * n[0] + gm[1] * n[1];
                    grad[tri[m]][0] += scale * frac * (gm[0] - gm_n * n[0]);
                    grad[tri[m]][1] += scale * frac * (gm[1] - gm_n * n[1]);
                }
            }
        }
    }
    Ok(grad)
}

/// J'(V) in volume form, evaluated as the assembled functional against V.
pub fn shape_gradient_volume(
    mesh: &Mesh,
    u: &ScalarField,
    f: &dyn SmoothField,
    g: &dyn SmoothField,
    v: &VectorField,
) -> Result<f64> {
    v.check_mesh(mesh)?;
    let grad = shape_gradient_functional(mesh, u, f, g)?;
    Ok(functional_dot(&grad, v))
}

pub fn functional_dot(grad: &[[f64; 2]], v: &VectorField) -> f64 {
    grad.iter().zip(v.values()).map(|(g, w)| g[0] * w[0] + g[1] * w[1]).sum()
}

/// Per-boundary-node energy density D with J'(V) ~ sum_b w_b D_b (V.n)_b:
/// the boundary form of the shape gradient.
#[derive(Debug, Clone)]
pub struct ShapeGradientDensity {
    pub values: Vec<f64>,
}

/// Boundary-form density
/// D = (|grad u|^2 + u^2)/2 - f u + H g |u| - dn(u q~) + g u grad(q~/g) . n,
/// with q the recovered flux extended harmonically into the domain (q~) and
/// normal derivatives of the extended products taken from node-averaged
/// gradients. On N-nodes q/g is locked at -sign(u), so only the normal
/// component of the last term survives; elsewhere the u factor kills it.
pub fn shape_gradient_density(
    mesh: &Mesh,
    u: &ScalarField,
    f: &ScalarField,
    g: &ScalarField,
    geo: &BoundaryGeometry,
    opts: &SolverOptions,
) -> Result<ShapeGradientDensity> {
    u.check_mesh(mesh)?;
    f.check_mesh(mesh)?;
    g.check_mesh(mesh)?;
    if geo.curvature.len() != mesh.boundary_nodes().len() {
        return Err(Error::Geometry("boundary geometry does not match the mesh".into()));
    }
    let a = fem::h1_matrix(mesh);
    let load = fem::assemble_load(mesh, f)?;
    let q = fem::recover_boundary_flux(mesh, &a, &load, u.values());
    let q_ext = harmonic_extension(mesh, &q, opts)?;
    let grad_u = fem::node_gradient_raw(mesh, u.values());

    // products extended as nodal P1 fields
    let uq: Vec<f64> = u.values().iter().zip(&q_ext).map(|(a, b)| a * b).collect();
    let q_over_g: Vec<f64> = q_ext.iter().zip(g.values()).map(|(qi, gi)| qi / gi).collect();
    let grad_uq = fem::node_gradient_raw(mesh, &uq);
    let grad_qg = fem::node_gradient_raw(mesh, &q_over_g);

    let mut d = vec![0.0; mesh.boundary_nodes().len()];
    for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
        let n = geo.normal[p];
        let ub = u.values()[b];
        let gu = grad_u[b];
        let dn_uq = grad_uq[b][0] * n[0] + grad_uq[b][1] * n[1];
        let dn_qg = grad_qg[b][0] * n[0] + grad_qg[b][1] * n[1];
        d[p] = 0.5 * (gu[0] * gu[0] + gu[1] * gu[1] + ub * ub) - f.values()[b] * ub
            + geo.curvature[p] * g.values()[b] * ub.abs()
            - dn_uq
            + g.values()[b] * ub * dn_qg;
    }
    Ok(ShapeGradientDensity { values: d })
}

/// Boundary density of the Dirichlet energy gradient,
/// -(|grad w|^2 + w^2)/2 = -q^2/2 on the boundary where w vanishes.
pub fn dirichlet_gradient_density(
    mesh: &Mesh,
    w: &ScalarField,
    f: &ScalarField,
) -> Result<ShapeGradientDensity> {
    w.check_mesh(mesh)?;
    let a = fem::h1_matrix(mesh);
    let load = fem::assemble_load(mesh, f)?;
    let q = fem::recover_boundary_flux(mesh, &a, &load, w.values());
    let values = mesh
        .boundary_nodes()
        .iter()
        .enumerate()
        .map(|(p, &b)| {
            let wb = w.values()[b];
            -0.5 * (q[p] * q[p] + wb * wb)
        })
        .collect();
    Ok(ShapeGradientDensity { values })
}

/// Boundary density of the Neumann energy gradient,
/// (|grad w|^2 + w^2)/2 - f w + H g w + dn(g w), with dn(g w) = g q + w grad g . n.
pub fn neumann_gradient_density(
    mesh: &Mesh,
    w: &ScalarField,
    f: &ScalarField,
    g: &dyn SmoothField,
    geo: &BoundaryGeometry,
) -> Result<ShapeGradientDensity> {
    w.check_mesh(mesh)?;
    let a = fem::h1_matrix(mesh);
    let load = fem::assemble_load(mesh, f)?;
    let q = fem::recover_boundary_flux(mesh, &a, &load, w.values());
    let grad_w = fem::node_gradient_raw(mesh, w.values());
    let values = mesh
        .boundary_nodes()
        .iter()
        .enumerate()
        .map(|(p, &b)| {
            let x = mesh.vertices()[b];
            let n = geo.normal[p];
            let wb = w.values()[b];
            let gw = grad_w[b];
            let gb = g.value(x);
            let dg = g.gradient(x);
            0.5 * (gw[0] * gw[0] + gw[1] * gw[1] + wb * wb) - f.values()[b] * wb
                + geo.curvature[p] * gb * wb
                + gb * q[p]
                + wb * (dg[0] * n[0] + dg[1] * n[1])
        })
        .collect();
    Ok(ShapeGradientDensity { values })
}

/// P1 extension with Dirichlet data on the boundary and zero stiffness
/// residual inside.
pub(crate) fn harmonic_extension(
    mesh: &Mesh,
    boundary_data: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let stiff = fem::assemble_stiffness(mesh, None)?;
    let mut data = vec![0.0; mesh.num_vertices()];
    for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
        data[b] = boundary_data[p];
    }
    let k_data = stiff.mul(&data);
    let mut rhs = vec![0.0; mesh.num_vertices()];
    for v in 0..mesh.num_vertices() {
        rhs[v] = if mesh.is_boundary_vertex(v) { data[v] } else { -k_data[v] };
    }
    let elim = stiff.eliminate_rows(mesh.boundary_nodes());
    sparse::solve_spd(&elim, &rhs, opts.cg_tol, opts.cg_maxit)
}

/// Pullback of the perturbed problem to the unperturbed mesh:
/// per-element matrix coefficient and Jacobian, per-boundary-edge
/// tangential Jacobian, all from F = I + t grad(V).
#[derive(Debug, Clone)]
pub struct PullbackCoefficients {
    pub coeff: Vec<Sym2>,
    pub jacobian: Vec<f64>,
    /// Tangential Jacobian per boundary edge.
    pub tangential: Vec<f64>,
    pub t: f64,
}

pub fn pullback_coefficients(mesh: &Mesh, v: &VectorField, t: f64) -> Result<PullbackCoefficients> {
    v.check_mesh(mesh)?;
    let nt = mesh.triangles().len();
    let mut coeff = Vec::with_capacity(nt);
    let mut jacobian = Vec::with_capacity(nt);
    let mut deform = Vec::with_capacity(nt); // F per element for the edges
    for e in 0..nt {
        let (_, grads) = fem::element_geometry(mesh, e);
        let tri = mesh.triangles()[e];
        let mut gv = [[0.0f64; 2]; 2]; // gv[i][j] = d v_i / d x_j
        for c in 0..3 {
            let w = v.values()[tri[c]];
            for i in 0..2 {
                for j in 0..2 {
                    gv[i][j] += w[i] * grads[c][j];
                }
            }
        }
        let f = [
            [1.0 + t * gv[0][0], t * gv[0][1]],
            [t * gv[1][0], 1.0 + t * gv[1][1]],
        ];
        let det = f[0][0] * f[1][1] - f[0][1] * f[1][0];
        if det <= 0.0 {
            return Err(Error::Geometry(format!(
                "pullback at t={t} is inadmissible: det(I + t grad V) = {det:e} on element {e}"
            )));
        }
        // A_t = det(F) F^-1 F^-T
        let inv = [[f[1][1] / det, -f[0][1] / det], [-f[1][0] / det, f[0][0] / det]];
        coeff.push(Sym2 {
            xx: det * (inv[0][0] * inv[0][0] + inv[0][1] * inv[0][1]),
            xy: det * (inv[0][0] * inv[1][0] + inv[0][1] * inv[1][1]),
            yy: det * (inv[1][0] * inv[1][0] + inv[1][1] * inv[1][1]),
        });
        jacobian.push(det);
        deform.push((f, inv, det));
    }
    let mut tangential = Vec::with_capacity(mesh.boundary_edges().len());
    for (e, &[i, j]) in mesh.boundary_edges().iter().enumerate() {
        let t_owner = mesh.boundary_edge_triangle(e);
        let (_, inv, det) = deform[t_owner];
        let p = mesh.vertices()[i];
        let q = mesh.vertices()[j];
        // unnormalized edge normal; the ratio keeps t = 0 exactly at 1
        let n = [q[1] - p[1], -(q[0] - p[0])];
        let fn_ = [inv[0][0] * n[0] + inv[1][0] * n[1], inv[0][1] * n[0] + inv[1][1] * n[1]];
        let ratio = (fn_[0] * fn_[0] + fn_[1] * fn_[1]).sqrt()
            / (n[0] * n[0] + n[1] * n[1]).sqrt();
        tangential.push(det * ratio);
    }
    Ok(PullbackCoefficients { coeff, jacobian, tangential, t })
}

/// The perturbed Tresca problem on the fixed mesh: stiffness with
/// coefficient A_t, mass weighted by J_t, data composed with id + tV, the
/// friction coefficients scaled by the tangential Jacobian. Nodal values
/// match the solve on the deformed mesh exactly (affine change of
/// variables).
pub fn solve_perturbed_tresca(
    mesh: &Mesh,
    v: &VectorField,
    t: f64,
    f: &dyn SmoothField,
    g: &dyn SmoothField,
    opts: &SolverOptions,
) -> Result<(ScalarField, TrescaSolveReport)> {
    let sys = perturbed_system(mesh, v, t, f, g)?;
    let (u, report) = vi::solve_tresca_system(mesh, &sys, None, opts)?;
    Ok((ScalarField::from_values(mesh, u)?, report))
}

pub(crate) fn perturbed_system(
    mesh: &Mesh,
    v: &VectorField,
    t: f64,
    f: &dyn SmoothField,
    g: &dyn SmoothField,
) -> Result<TrescaSystem> {
    let pc = pullback_coefficients(mesh, v, t)?;
    let stiff = fem::assemble_stiffness(mesh, Some(&pc.coeff))?;
    let mass = fem::assemble_mass(mesh, Some(&pc.jacobian))?;
    let matrix = fem::add_matrices(&stiff, &mass);
    // load: int f_t J_t phi with f_t sampled at the displaced vertices
    let displaced = |i: usize| {
        let x = mesh.vertices()[i];
        let w = v.values()[i];
        [x[0] + t * w[0], x[1] + t * w[1]]
    };
    let f_t: Vec<f64> = (0..mesh.num_vertices()).map(|i| f.value(displaced(i))).collect();
    let load = mass.mul(&f_t);
    // friction: c_b = g_t(b) * (length-weighted edge average of J_T) * w_b
    //         = g_t(b) * 1/2 sum_{e at b} J_T^e len(e)
    let nb = mesh.boundary_nodes().len();
    let mut lumped = vec![0.0; nb];
    for (e, &[i, j]) in mesh.boundary_edges().iter().enumerate() {
        let p = mesh.vertices()[i];
        let q = mesh.vertices()[j];
        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        let half = 0.5 * pc.tangential[e] * len;
        lumped[mesh.boundary_position(i).unwrap()] += half;
        lumped[mesh.boundary_position(j).unwrap()] += half;
    }
    for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
        let gt = g.value(displaced(b));
        if !(gt > 0.0) {
            return Err(Error::Data(format!(
                "perturbed friction bound must stay positive, g_t({b}) = {gt}"
            )));
        }
        lumped[p] *= gt;
    }
    Ok(TrescaSystem { matrix, load, lumped })
}

/// Material directional derivative: assembles the derivative functional of
/// the perturbed problem and solves the sign-constrained variational
/// inequality over the cone given by the boundary classification.
pub fn material_derivative(
    mesh: &Mesh,
    u0: &ScalarField,
    f: &dyn SmoothField,
    g: &dyn SmoothField,
    v: &VectorField,
    classification: &BoundaryClassification,
    opts: &SolverOptions,
) -> Result<ScalarField> {
    u0.check_mesh(mesh)?;
    v.check_mesh(mesh)?;
    if classification.labels.len() != mesh.boundary_nodes().len() {
        return Err(Error::MeshMismatch("classification does not match the boundary".into()));
    }
    let rhs = material_derivative_functional(mesh, u0, f, g, v)?;
    vi::solve_constrained_vi(mesh, &rhs, &classification.constraints(), opts)
}

/// The linear functional l(v) of the material-derivative inequality:
/// int (V. grad u0) v - int [(-gV - gV' + divV I) grad u0 - (u0 - f) V]. grad v
/// + bd [V.n (f - u0) + ((grad g / g).V + div_G V) q] v, node-lumped on the
/// boundary, with q the recovered flux.
fn material_derivative_functional(
    mesh: &Mesh,
    u0: &ScalarField,
    f: &dyn SmoothField,
    g: &dyn SmoothField,
    v: &VectorField,
) -> Result<Vec<f64>> {
    let uv = u0.values();
    let mut rhs = vec![0.0; mesh.num_vertices()];

    for t in 0..mesh.triangles().len() {
        let (area, grads) = fem::element_geometry(mesh, t);
        let tri = mesh.triangles()[t];
        let mut gu = [0.0; 2];
        let mut gv = [[0.0f64; 2]; 2];
        for c in 0..3 {
            gu[0] += uv[tri[c]] * grads[c][0];
            gu[1] += uv[tri[c]] * grads[c][1];
            let w = v.values()[tri[c]];
            for i in 0..2 {
                for j in 0..2 {
                    gv[i][j] += w[i] * grads[c][j];
                }
            }
        }
        let div = gv[0][0] + gv[1][1];
        // A'_0 = -grad V - grad V' + div(V) I
        let aprime = Sym2 {
            xx: div - 2.0 * gv[0][0],
            xy: -(gv[0][1] + gv[1][0]),
            yy: div - 2.0 * gv[1][1],
        };
        let agu = aprime.apply(gu);
        // int (V . grad u0) v : nodal P1 values of V.grad(u0) on this element
        let mut s = [0.0; 3];
        for c in 0..3 {
            let w = v.values()[tri[c]];
            s[c] = w[0] * gu[0] + w[1] * gu[1];
        }
        // int (u0 - f) V, exact for the P1 x P1 product
        let mut w_nod = [0.0; 3];
        for c in 0..3 {
            w_nod[c] = uv[tri[c]] - f.value(mesh.vertices()[tri[c]]);
        }
        let mut p_vec = [0.0; 2];
        for m in 0..3 {
            let sum: f64 = (0..3).map(|l| w_nod[l] * if l == m { 2.0 } else { 1.0 }).sum();
            p_vec[0] += area / 12.0 * sum * v.values()[tri[m]][0];
            p_vec[1] += area / 12.0 * sum * v.values()[tri[m]][1];
        }
        for i in 0..3 {
            let mass_row: f64 = (0..3).map(|m| s[m] * if m == i { 2.0 } else { 1.0 }).sum();
            rhs[tri[i]] += area / 12.0 * mass_row;
            rhs[tri[i]] -= area * (agu[0] * grads[i][0] + agu[1] * grads[i][1]);
            rhs[tri[i]] += grads[i][0] * p_vec[0] + grads[i][1] * p_vec[1];
        }
    }

    let a = fem::h1_matrix(mesh);
    let f_nodal = fem::interpolate(mesh, |p| f.value(p));
    let load = fem::assemble_load(mesh, &f_nodal)?;
    let q = fem::recover_boundary_flux(mesh, &a, &load, uv);
    let geo = mesh.boundary_geometry(crate::mesh::CurvatureMethod::Osculating)?;
    let gv_nodes = node_velocity_gradient(mesh, v);
    for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
        let x = mesh.vertices()[b];
        let n = geo.normal[p];
        let vb = v.values()[b];
        let vn = vb[0] * n[0] + vb[1] * n[1];
        let gb = g.value(x);
        let dg = g.gradient(x);
        let gvb = gv_nodes[b];
        let div = gvb[0][0] + gvb[1][1];
        let nvn = n[0] * (gvb[0][0] * n[0] + gvb[0][1] * n[1])
            + n[1] * (gvb[1][0] * n[0] + gvb[1][1] * n[1]);
        let div_tan = div - nvn;
        let term = vn * (f.value(x) - uv[b]) + ((dg[0] * vb[0] + dg[1] * vb[1]) / gb + div_tan) * q[p];
        rhs[b] += geo.weight[p] * term;
    }
    Ok(rhs)
}

/// u'_0 = ubar'_0 - grad(u0) . V at the nodes.
pub fn shape_directional_derivative(
    mesh: &Mesh,
    u0: &ScalarField,
    v: &VectorField,
    material: &ScalarField,
) -> Result<ScalarField> {
    u0.check_mesh(mesh)?;
    v.check_mesh(mesh)?;
    material.check_mesh(mesh)?;
    let grad = fem::node_gradient(mesh, u0)?;
    let values = (0..mesh.num_vertices())
        .map(|i| {
            let g = grad.values()[i];
            let w = v.values()[i];
            material.values()[i] - (g[0] * w[0] + g[1] * w[1])
        })
        .collect();
    ScalarField::from_values(mesh, values)
}

/// One row of the shape-gradient finite-difference ladder.
#[derive(Debug, Clone)]
pub struct FdRow {
    pub t: f64,
    /// (J(deformed mesh at t) - J(mesh)) / t; None when the deformation
    /// inverted an element.
    pub fd_deformed: Option<f64>,
    /// Same quotient through the fixed-mesh pullback solve.
    pub fd_pullback: Option<f64>,
    pub formula: f64,
    pub gap: Option<f64>,
}

/// Finite-difference verification of the volume-form shape gradient:
/// independent Tresca solves on each deformed mesh against the assembled
/// formula value.
pub fn fd_shape_gradient(
    mesh: &Mesh,
    f: &dyn SmoothField,
    g: &dyn SmoothField,
    v: &VectorField,
    t_list: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<FdRow>> {
    let f0 = fem::interpolate(mesh, |p| f.value(p));
    let g0 = fem::interpolate(mesh, |p| g.value(p));
    let (u0, _) = vi::solve_tresca_switching(mesh, &f0, &g0, None, opts)?;
    let j0 = tresca_energy(mesh, &u0, &f0, &g0)?;
    let formula = shape_gradient_volume(mesh, &u0, f, g, v)?;

    let mut rows = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let fd_deformed = match mesh.deform(v, t) {
            Ok(moved) => {
                let ft = fem::interpolate(&moved, |p| f.value(p));
                let gt = fem::interpolate(&moved, |p| g.value(p));
                let (ut, _) = vi::solve_tresca_switching(&moved, &ft, &gt, None, opts)?;
                Some((tresca_energy(&moved, &ut, &ft, &gt)? - j0) / t)
            }
            Err(Error::Inversion { .. }) => None,
            Err(e) => return Err(e),
        };
        let fd_pullback = match perturbed_system(mesh, v, t, f, g) {
            Ok(sys) => {
                let (ut, _) = vi::solve_tresca_system(mesh, &sys, None, opts)?;
                Some((sys.energy(mesh, &ut) - j0) / t)
            }
            Err(Error::Geometry(_)) | Err(Error::Inversion { .. }) => None,
            Err(e) => return Err(e),
        };
        rows.push(FdRow {
            t,
            fd_deformed,
            fd_pullback,
            formula,
            gap: fd_deformed.map(|fd| fd - formula),
        });
    }
    Ok(rows)
}
