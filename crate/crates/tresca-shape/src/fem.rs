//! P1 finite-element machinery: nodal fields, stiffness/mass assembly with
//! optional coefficients, load vectors, the node-lumped boundary functional,
//! variationally consistent flux recovery and gradient utilities.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::{SparseMatrix, Triplets};

/// Closed-form scalar data with a gradient, evaluated anywhere in the plane.
pub trait SmoothField {
    fn value(&self, p: [f64; 2]) -> f64;
    fn gradient(&self, p: [f64; 2]) -> [f64; 2];
}

impl<F, G> SmoothField for (F, G)
where
    F: Fn([f64; 2]) -> f64,
    G: Fn([f64; 2]) -> [f64; 2],
{
    fn value(&self, p: [f64; 2]) -> f64 {
        (self.0)(p)
    }
    fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        (self.1)(p)
    }
}

/// Nodal P1 scalar coefficients tied to one mesh.
#[derive(Debug, Clone)]
pub struct ScalarField {
    mesh: crate::mesh::MeshId,
    values: Vec<f64>,
}

/// Nodal P1 vector coefficients tied to one mesh.
#[derive(Debug, Clone)]
pub struct VectorField {
    mesh: crate::mesh::MeshId,
    values: Vec<[f64; 2]>,
}

impl ScalarField {
    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::MeshMismatch(format!(
                "field has {} values, mesh has {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        Ok(ScalarField { mesh: mesh.id(), values })
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> ScalarField {
        ScalarField { mesh: mesh.id(), values: mesh.vertices().iter().map(|&p| f(p)).collect() }
    }

    pub fn zeros(mesh: &Mesh) -> ScalarField {
        ScalarField { mesh: mesh.id(), values: vec![0.0; mesh.num_vertices()] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh != mesh.id() {
            return Err(Error::MeshMismatch("scalar field built on a different mesh".into()));
        }
        Ok(())
    }
}

impl VectorField {
    pub fn from_values(mesh: &Mesh, values: Vec<[f64; 2]>) -> Result<VectorField> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::MeshMismatch(format!(
                "vector field has {} values, mesh has {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        Ok(VectorField { mesh: mesh.id(), values })
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> VectorField {
        VectorField { mesh: mesh.id(), values: mesh.vertices().iter().map(|&p| f(p)).collect() }
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn scaled(&self, alpha: f64) -> VectorField {
        VectorField {
            mesh: self.mesh,
            values: self.values.iter().map(|v| [alpha * v[0], alpha * v[1]]).collect(),
        }
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh != mesh.id() {
            return Err(Error::MeshMismatch("vector field built on a different mesh".into()));
        }
        Ok(())
    }
}

/// Sample a closed-form function at the mesh vertices.
pub fn interpolate(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> ScalarField {
    ScalarField::from_fn(mesh, f)
}

/// Symmetric 2x2 coefficient matrix for the stiffness form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 { xx: 1.0, xy: 0.0, yy: 1.0 };

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let tr = self.xx + self.yy;
        let det = self.xx * self.yy - self.xy * self.xy;
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        0.5 * (tr - disc)
    }
}

/// Area and the three constant basis gradients of a triangle.
pub fn element_geometry(mesh: &Mesh, t: usize) -> (f64, [[f64; 2]; 3]) {
    let [i, j, k] = mesh.triangles()[t];
    let p = [mesh.vertices()[i], mesh.vertices()[j], mesh.vertices()[k]];
    let area = crate::mesh::signed_area(p[0], p[1], p[2]);
    let inv2a = 1.0 / (2.0 * area);
    let grads = [
        [(p[1][1] - p[2][1]) * inv2a, (p[2][0] - p[1][0]) * inv2a],
        [(p[2][1] - p[0][1]) * inv2a, (p[0][0] - p[2][0]) * inv2a],
        [(p[0][1] - p[1][1]) * inv2a, (p[1][0] - p[0][0]) * inv2a],
    ];
    (area, grads)
}

/// Stiffness matrix K[i,j] = sum_T area(T) (M_T grad phi_j) . grad phi_i,
/// with per-element symmetric coefficient M_T (identity when `None`).
pub fn assemble_stiffness(mesh: &Mesh, coeff: Option<&[Sym2]>) -> Result<SparseMatrix> {
    if let Some(c) = coeff {
        if c.len() != mesh.triangles().len() {
            return Err(Error::Assembly(format!(
                "coefficient has {} entries for {} elements",
                c.len(),
                mesh.triangles().len()
            )));
        }
        for (t, m) in c.iter().enumerate() {
            if m.min_eigenvalue() < -1e-12 {
                return Err(Error::Assembly(format!(
                    "coefficient on element {t} is not positive semidefinite \
                     (min eigenvalue {:e})",
                    m.min_eigenvalue()
                )));
            }
        }
    }
    let mut trips = Triplets::new(mesh.num_vertices());
    for t in 0..mesh.triangles().len() {
        let (area, grads) = element_geometry(mesh, t);
        let m = coeff.map_or(Sym2::IDENTITY, |c| c[t]);
        let tri = mesh.triangles()[t];
        for a in 0..3 {
            let mg = m.apply(grads[a]);
            for b in 0..3 {
                let v = area * (mg[0] * grads[b][0] + mg[1] * grads[b][1]);
                trips.push(tri[b], tri[a], v);
            }
        }
    }
    Ok(trips.into_csr())
}

/// Consistent P1 mass matrix, element block (w_T area / 12) [[2,1,1],[1,2,1],[1,1,2]],
/// with per-element positive weight (1 when `None`).
pub fn assemble_mass(mesh: &Mesh, weight: Option<&[f64]>) -> Result<SparseMatrix> {
    if let Some(w) = weight {
        if w.len() != mesh.triangles().len() {
            return Err(Error::Assembly(format!(
                "weight has {} entries for {} elements",
                w.len(),
                mesh.triangles().len()
            )));
        }
        for (t, &wt) in w.iter().enumerate() {
            if !(wt > 0.0) {
                return Err(Error::Assembly(format!("weight on element {t} is {wt}, must be > 0")));
            }
        }
    }
    let mut trips = Triplets::new(mesh.num_vertices());
    for t in 0..mesh.triangles().len() {
        let area = mesh.triangle_area(t);
        let w = weight.map_or(1.0, |w| w[t]);
        let s = w * area / 12.0;
        let tri = mesh.triangles()[t];
        for a in 0..3 {
            for b in 0..3 {
                trips.push(tri[a], tri[b], if a == b { 2.0 * s } else { s });
            }
        }
    }
    Ok(trips.into_csr())
}

/// Load vector L[i] = int f_h phi_i via the consistent mass matrix, L = M f.
pub fn assemble_load(mesh: &Mesh, f: &ScalarField) -> Result<Vec<f64>> {
    f.check_mesh(mesh)?;
    let mass = assemble_mass(mesh, None)?;
    Ok(mass.mul(f.values()))
}

/// Node-lumped coefficients of the friction functional: c_b = g(b) w_b so
/// that phi_h(v) = sum_b c_b |v(b)|. Every solver and energy in the crate
/// uses this single quadrature.
pub fn boundary_lumped_weights(mesh: &Mesh, g: &ScalarField) -> Result<Vec<f64>> {
    g.check_mesh(mesh)?;
    let weights = boundary_weights(mesh);
    let mut c = Vec::with_capacity(weights.len());
    for (p, &b) in mesh.boundary_nodes().iter().enumerate() {
        let gb = g.values()[b];
        if !(gb > 0.0) {
            return Err(Error::Data(format!(
                "friction bound must be positive on the boundary, g({b}) = {gb}"
            )));
        }
        c.push(gb * weights[p]);
    }
    Ok(c)
}

/// Lumped boundary measures (half the adjacent edge lengths), in
/// `boundary_nodes` order.
pub fn boundary_weights(mesh: &Mesh) -> Vec<f64> {
    let nb = mesh.boundary_nodes().len();
    let mut len = vec![0.0; nb];
    for (e, &[i, j]) in mesh.boundary_edges().iter().enumerate() {
        let p = mesh.vertices()[i];
        let q = mesh.vertices()[j];
        len[e] = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
    }
    (0..nb).map(|p| 0.5 * (len[(p + nb - 1) % nb] + len[p])).collect()
}

/// Variationally consistent discrete normal flux at the boundary nodes:
/// q(b) = [a(u, phi_b) - (f, phi_b)] / w_b, taking the assembled bilinear
/// form `matrix` and load `load` as the context. Satisfies the discrete
/// divergence identity sum_b q_b w_b v(b) = a(u,v) - (f,v) exactly for v in
/// the boundary nodal span.
pub fn recover_boundary_flux(
    mesh: &Mesh,
    matrix: &SparseMatrix,
    load: &[f64],
    u: &[f64],
) -> Vec<f64> {
    let residual = matrix.mul(u);
    let weights = boundary_weights(mesh);
    mesh.boundary_nodes()
        .iter()
        .enumerate()
        .map(|(p, &b)| (residual[b] - load[b]) / weights[p])
        .collect()
}

/// Exact P1 gradient, constant on each element.
pub fn gradient_p1(mesh: &Mesh, u: &ScalarField) -> Result<Vec<[f64; 2]>> {
    u.check_mesh(mesh)?;
    Ok(gradient_p1_raw(mesh, u.values()))
}

pub(crate) fn gradient_p1_raw(mesh: &Mesh, u: &[f64]) -> Vec<[f64; 2]> {
    (0..mesh.triangles().len())
        .map(|t| {
            let (_, grads) = element_geometry(mesh, t);
            let tri = mesh.triangles()[t];
            let mut g = [0.0; 2];
            for a in 0..3 {
                g[0] += u[tri[a]] * grads[a][0];
                g[1] += u[tri[a]] * grads[a][1];
            }
            g
        })
        .collect()
}

/// Area-weighted average of adjacent element gradients at every vertex.
pub fn node_gradient(mesh: &Mesh, u: &ScalarField) -> Result<VectorField> {
    u.check_mesh(mesh)?;
    VectorField::from_values(mesh, node_gradient_raw(mesh, u.values()))
}

pub(crate) fn node_gradient_raw(mesh: &Mesh, u: &[f64]) -> Vec<[f64; 2]> {
    let elem = gradient_p1_raw(mesh, u);
    (0..mesh.num_vertices())
        .map(|v| {
            let mut g = [0.0; 2];
            let mut total = 0.0;
            for &t in mesh.vertex_triangles(v) {
                let a = mesh.triangle_area(t);
                g[0] += a * elem[t][0];
                g[1] += a * elem[t][1];
                total += a;
            }
            if total > 0.0 {
                [g[0] / total, g[1] / total]
            } else {
                [0.0, 0.0]
            }
        })
        .collect()
}

/// The H1 operator K + M with identity coefficient and unit weight.
pub fn h1_matrix(mesh: &Mesh) -> SparseMatrix {
    let k = assemble_stiffness(mesh, None).expect("identity coefficient");
    let m = assemble_mass(mesh, None).expect("unit weight");
    add_matrices(&k, &m)
}

pub fn add_matrices(a: &SparseMatrix, b: &SparseMatrix) -> SparseMatrix {
    assert_eq!(a.dim(), b.dim());
    let mut trips = Triplets::new(a.dim());
    for m in [a, b] {
        for i in 0..m.dim() {
            for (j, v) in m.row(i) {
                trips.push(i, j, v);
            }
        }
    }
    trips.into_csr()
}

/// u' (K+M) v on the mesh the fields live on.
pub fn h1_inner(mesh: &Mesh, u: &ScalarField, v: &ScalarField) -> Result<f64> {
    u.check_mesh(mesh)?;
    v.check_mesh(mesh)?;
    let h1 = h1_matrix(mesh);
    Ok(h1.quadratic(u.values(), v.values()))
}

pub fn h1_norm(mesh: &Mesh, u: &ScalarField) -> Result<f64> {
    Ok(h1_inner(mesh, u, u)?.max(0.0).sqrt())
}
