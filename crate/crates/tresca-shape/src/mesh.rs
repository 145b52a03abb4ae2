//! Conforming triangle meshes with a single positively oriented boundary
//! loop: construction, validation, file I/O, deformation and the discrete
//! boundary geometry (normals, lumped measures, curvature).

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::fem;

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

/// Identity token tying fields to the mesh they were built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeshId(u64);

fn fresh_id() -> MeshId {
    MeshId(NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed))
}

/// How boundary curvature is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureMethod {
    /// Circle through three consecutive boundary nodes, signed by orientation.
    Osculating,
    /// Harmonic extension of the normal field into the domain, then
    /// H = div(n~) - (grad(n~) n) . n sampled at boundary nodes.
    NormalExtension,
}

/// Immutable conforming triangle mesh. All triangles are counterclockwise,
/// the boundary is one simple closed loop oriented with the interior on its
/// left. Operations never mutate; deformation returns a new mesh.
#[derive(Debug, Clone)]
pub struct Mesh {
    id: MeshId,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    boundary_nodes: Vec<usize>,
    boundary_pos: Vec<Option<usize>>,
    vertex_tris: Vec<Vec<usize>>,
}

/// Per-boundary-node geometry, indexed like `Mesh::boundary_nodes`.
#[derive(Debug, Clone)]
pub struct BoundaryGeometry {
    /// Outward unit normals.
    pub normal: Vec<[f64; 2]>,
    /// Lumped boundary measure: half the length of the two adjacent edges.
    pub weight: Vec<f64>,
    /// Mean curvature H (1/R on a circle of radius R).
    pub curvature: Vec<f64>,
}

pub fn signed_area(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> f64 {
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}

impl Mesh {
    /// Build and fully validate a mesh. `boundary_edges` may be listed in any
    /// order but must chain into exactly one positively oriented loop.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<[usize; 2]>,
    ) -> Result<Mesh> {
        let nv = vertices.len();
        if nv < 3 || triangles.is_empty() || boundary_edges.len() < 3 {
            return Err(Error::Validation(
                "mesh needs at least 3 vertices, 1 triangle and 3 boundary edges".into(),
            ));
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::Validation(format!(
                        "triangle {t} references vertex {v} out of range {nv}"
                    )));
                }
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area <= 0.0 {
                return Err(Error::Validation(format!(
                    "triangle {t} has non-positive signed area {area:e} (must be counterclockwise)"
                )));
            }
        }
        // directed edge -> owning triangle count
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &triangles {
            for e in 0..3 {
                let key = (tri[e], tri[(e + 1) % 3]);
                *directed.entry(key).or_insert(0) += 1;
                if directed[&key] > 1 {
                    return Err(Error::Validation(format!(
                        "directed edge {}->{} appears in more than one triangle",
                        key.0, key.1
                    )));
                }
            }
        }
        let mut is_boundary_edge: HashMap<(usize, usize), bool> = HashMap::new();
        for &[i, j] in &boundary_edges {
            if i >= nv || j >= nv {
                return Err(Error::Validation(format!(
                    "boundary edge {i}->{j} references a vertex out of range"
                )));
            }
            if i == j {
                return Err(Error::Validation(format!("boundary edge {i}->{j} is degenerate")));
            }
            if is_boundary_edge.insert((i, j), true).is_some() {
                return Err(Error::Validation(format!("boundary edge {i}->{j} listed twice")));
            }
            if directed.get(&(i, j)).copied().unwrap_or(0) != 1 {
                return Err(Error::Validation(format!(
                    "boundary edge {i}->{j} is not an edge of exactly one triangle \
                     with matching orientation"
                )));
            }
            if directed.contains_key(&(j, i)) {
                return Err(Error::Validation(format!(
                    "boundary edge {i}->{j} is shared by two triangles (interior edge)"
                )));
            }
        }
        // conformity: every unmatched triangle edge must be a boundary edge
        for (&(i, j), _) in &directed {
            if !directed.contains_key(&(j, i)) && !is_boundary_edge.contains_key(&(i, j)) {
                return Err(Error::Validation(format!(
                    "triangle edge {i}->{j} has no neighbour and is not listed as boundary"
                )));
            }
        }
        // chain the loop
        let mut next: HashMap<usize, usize> = HashMap::new();
        for &[i, j] in &boundary_edges {
            if next.insert(i, j).is_some() {
                return Err(Error::Validation(format!(
                    "vertex {i} is the source of two boundary edges (non-manifold boundary)"
                )));
            }
        }
        let start = boundary_edges[0][0];
        let mut boundary_nodes = Vec::with_capacity(boundary_edges.len());
        let mut cur = start;
        loop {
            boundary_nodes.push(cur);
            cur = *next.get(&cur).ok_or_else(|| {
                Error::Validation(format!("boundary is not closed: no edge leaves vertex {cur}"))
            })?;
            if cur == start {
                break;
            }
            if boundary_nodes.len() > boundary_edges.len() {
                return Err(Error::Validation("boundary loop does not close".into()));
            }
        }
        if boundary_nodes.len() != boundary_edges.len() {
            return Err(Error::Validation(format!(
                "boundary edges form more than one loop ({} of {} edges reachable)",
                boundary_nodes.len(),
                boundary_edges.len()
            )));
        }
        // re-emit edges in walk order so nodes and edges always agree
        let ordered_edges: Vec<[usize; 2]> = (0..boundary_nodes.len())
            .map(|p| [boundary_nodes[p], boundary_nodes[(p + 1) % boundary_nodes.len()]])
            .collect();

        let mut boundary_pos = vec![None; nv];
        for (p, &b) in boundary_nodes.iter().enumerate() {
            boundary_pos[b] = Some(p);
        }
        let mut vertex_tris = vec![Vec::new(); nv];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_tris[v].push(t);
            }
        }
        Ok(Mesh {
            id: fresh_id(),
            vertices,
            triangles,
            boundary_edges: ordered_edges,
            boundary_nodes,
            boundary_pos,
            vertex_tris,
        })
    }

    pub fn id(&self) -> MeshId {
        self.id
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    /// Boundary vertex indices in loop order.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    /// Position of a vertex in the boundary loop, if it lies on the boundary.
    pub fn boundary_position(&self, vertex: usize) -> Option<usize> {
        self.boundary_pos[vertex]
    }

    pub fn is_boundary_vertex(&self, vertex: usize) -> bool {
        self.boundary_pos[vertex].is_some()
    }

    /// Triangles adjacent to a vertex.
    pub fn vertex_triangles(&self, vertex: usize) -> &[usize] {
        &self.vertex_tris[vertex]
    }

    /// The unique triangle owning boundary edge `e` (validated at
    /// construction).
    pub fn boundary_edge_triangle(&self, e: usize) -> usize {
        let [i, j] = self.boundary_edges[e];
        for &t in &self.vertex_tris[i] {
            let tri = self.triangles[t];
            for c in 0..3 {
                if tri[c] == i && tri[(c + 1) % 3] == j {
                    return t;
                }
            }
        }
        unreachable!("boundary edge {i}->{j} lost its triangle")
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [i, j, k] = self.triangles[t];
        signed_area(self.vertices[i], self.vertices[j], self.vertices[k])
    }

    /// Total area as the sum of triangle areas.
    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Worst-element metrics: (smallest interior angle in degrees,
    /// smallest triangle area). Used for logging and remesh warnings.
    pub fn quality(&self) -> (f64, f64) {
        let mut min_angle = f64::INFINITY;
        let mut min_area = f64::INFINITY;
        for (t, tri) in self.triangles.iter().enumerate() {
            min_area = min_area.min(self.triangle_area(t));
            for c in 0..3 {
                let p = self.vertices[tri[c]];
                let a = self.vertices[tri[(c + 1) % 3]];
                let b = self.vertices[tri[(c + 2) % 3]];
                let u = [a[0] - p[0], a[1] - p[1]];
                let v = [b[0] - p[0], b[1] - p[1]];
                let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
                let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
                if nu == 0.0 || nv == 0.0 {
                    min_angle = 0.0;
                    continue;
                }
                let cosv = ((u[0] * v[0] + u[1] * v[1]) / (nu * nv)).clamp(-1.0, 1.0);
                min_angle = min_angle.min(cosv.acos().to_degrees());
            }
        }
        (min_angle, min_area)
    }

    /// Boundary length (sum of boundary edge lengths).
    pub fn perimeter(&self) -> f64 {
        self.boundary_edges
            .iter()
            .map(|&[i, j]| {
                let p = self.vertices[i];
                let q = self.vertices[j];
                ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
            })
            .sum()
    }

    /// Move every vertex by `tau * velocity` and return the new mesh.
    /// Connectivity is unchanged; any inverted triangle aborts the
    /// deformation with the smallest signed area so callers can backtrack.
    pub fn deform(&self, velocity: &fem::VectorField, tau: f64) -> Result<Mesh> {
        velocity.check_mesh(self)?;
        if tau < 0.0 {
            return Err(Error::Parameter(format!("deformation step tau={tau} must be >= 0")));
        }
        let v = velocity.values();
        let vertices: Vec<[f64; 2]> = self
            .vertices
            .iter()
            .zip(v)
            .map(|(x, w)| [x[0] + tau * w[0], x[1] + tau * w[1]])
            .collect();
        let mut min_area = f64::INFINITY;
        for tri in &self.triangles {
            min_area =
                min_area.min(signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]));
        }
        if min_area <= 0.0 {
            return Err(Error::Inversion { min_area });
        }
        Ok(Mesh { id: fresh_id(), vertices, ..self.clone() })
    }

    /// Outward unit normals and lumped measures of the boundary, plus
    /// curvature by the requested method.
    pub fn boundary_geometry(&self, method: CurvatureMethod) -> Result<BoundaryGeometry> {
        let nb = self.boundary_nodes.len();
        let mut edge_len = vec![0.0; nb];
        let mut edge_normal = vec![[0.0; 2]; nb];
        for (e, &[i, j]) in self.boundary_edges.iter().enumerate() {
            let p = self.vertices[i];
            let q = self.vertices[j];
            let d = [q[0] - p[0], q[1] - p[1]];
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if len == 0.0 {
                return Err(Error::Geometry(format!("boundary edge {i}->{j} has zero length")));
            }
            edge_len[e] = len;
            // interior on the left of the walk, so outward points right
            edge_normal[e] = [d[1] / len, -d[0] / len];
        }
        let mut normal = vec![[0.0; 2]; nb];
        let mut weight = vec![0.0; nb];
        for p in 0..nb {
            let prev = (p + nb - 1) % nb;
            weight[p] = 0.5 * (edge_len[prev] + edge_len[p]);
            let nx = edge_len[prev] * edge_normal[prev][0] + edge_len[p] * edge_normal[p][0];
            let ny = edge_len[prev] * edge_normal[prev][1] + edge_len[p] * edge_normal[p][1];
            let nn = (nx * nx + ny * ny).sqrt();
            if nn == 0.0 {
                return Err(Error::Geometry(format!(
                    "degenerate normal at boundary vertex {}",
                    self.boundary_nodes[p]
                )));
            }
            normal[p] = [nx / nn, ny / nn];
        }
        let curvature = match method {
            CurvatureMethod::Osculating => self.curvature_osculating(),
            CurvatureMethod::NormalExtension => self.curvature_extension(&normal)?,
        };
        Ok(BoundaryGeometry { normal, weight, curvature })
    }

    fn curvature_osculating(&self) -> Vec<f64> {
        let nb = self.boundary_nodes.len();
        let mut h = vec![0.0; nb];
        for p in 0..nb {
            let a = self.vertices[self.boundary_nodes[(p + nb - 1) % nb]];
            let b = self.vertices[self.boundary_nodes[p]];
            let c = self.vertices[self.boundary_nodes[(p + 1) % nb]];
            let ab = [b[0] - a[0], b[1] - a[1]];
            let bc = [c[0] - b[0], c[1] - b[1]];
            let ac = [c[0] - a[0], c[1] - a[1]];
            let cross = ab[0] * bc[1] - ab[1] * bc[0];
            let lab = (ab[0] * ab[0] + ab[1] * ab[1]).sqrt();
            let lbc = (bc[0] * bc[0] + bc[1] * bc[1]).sqrt();
            let lac = (ac[0] * ac[0] + ac[1] * ac[1]).sqrt();
            h[p] = if lab * lbc * lac == 0.0 { 0.0 } else { 2.0 * cross / (lab * lbc * lac) };
        }
        h
    }

    /// Paper-faithful curvature: extend the normal harmonically into the
    /// domain, then H = div(n~) - (grad(n~) n) . n at boundary nodes.
    fn curvature_extension(&self, normal: &[[f64; 2]]) -> Result<Vec<f64>> {
        let stiff = fem::assemble_stiffness(self, None)?;
        let elim = stiff.eliminate_rows(&self.boundary_nodes);
        let mut ext = [vec![0.0; self.num_vertices()], vec![0.0; self.num_vertices()]];
        for comp in 0..2 {
            let mut data = vec![0.0; self.num_vertices()];
            for (p, &b) in self.boundary_nodes.iter().enumerate() {
                data[b] = normal[p][comp];
            }
            let k_data = stiff.mul(&data);
            let mut rhs = vec![0.0; self.num_vertices()];
            for v in 0..self.num_vertices() {
                rhs[v] = if self.is_boundary_vertex(v) { data[v] } else { -k_data[v] };
            }
            ext[comp] = crate::sparse::solve_spd(&elim, &rhs, 1e-12, 20 * self.num_vertices())?;
        }
        let gx = fem::node_gradient_raw(self, &ext[0]);
        let gy = fem::node_gradient_raw(self, &ext[1]);
        let mut h = vec![0.0; self.boundary_nodes.len()];
        for (p, &b) in self.boundary_nodes.iter().enumerate() {
            let n = normal[p];
            let div = gx[b][0] + gy[b][1];
            // (grad(n~) n) . n with grad rows = (grad n~_x, grad n~_y)
            let gn = [
                gx[b][0] * n[0] + gx[b][1] * n[1],
                gy[b][0] * n[0] + gy[b][1] * n[1],
            ];
            h[p] = div - (gn[0] * n[0] + gn[1] * n[1]);
        }
        Ok(h)
    }

    /// Serialize in the line-oriented text format:
    /// `nv nt nb`, then vertices `x y`, triangles `i j k`, boundary edges `i j`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!(
            "{} {} {}\n",
            self.vertices.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        ));
        for v in &self.vertices {
            out.push_str(&format!("{} {}\n", v[0], v[1]));
        }
        for t in &self.triangles {
            out.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
        }
        for e in &self.boundary_edges {
            out.push_str(&format!("{} {}\n", e[0], e[1]));
        }
        std::fs::write(path, out).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Mesh::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Mesh> {
        let mut lines = text
            .lines()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Validation("empty mesh file".into()))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Validation(format!("bad header `{header}`"))))
            .collect::<Result<_>>()?;
        if counts.len() != 3 {
            return Err(Error::Validation(format!("header `{header}` must be `nv nt nb`")));
        }
        let (nv, nt, nb) = (counts[0], counts[1], counts[2]);
        let mut vertices = Vec::with_capacity(nv);
        for k in 0..nv {
            let line = lines
                .next()
                .ok_or_else(|| Error::Validation(format!("missing vertex line {k}")))?;
            let xs: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse().map_err(|_| Error::Validation(format!("bad vertex line `{line}`")))
                })
                .collect::<Result<_>>()?;
            if xs.len() != 2 {
                return Err(Error::Validation(format!("vertex line `{line}` must be `x y`")));
            }
            vertices.push([xs[0], xs[1]]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for k in 0..nt {
            let line = lines
                .next()
                .ok_or_else(|| Error::Validation(format!("missing triangle line {k}")))?;
            let xs: Vec<usize> = line
                .split_whitespace()
                .map(|t| {
                    t.parse().map_err(|_| Error::Validation(format!("bad triangle line `{line}`")))
                })
                .collect::<Result<_>>()?;
            if xs.len() != 3 {
                return Err(Error::Validation(format!("triangle line `{line}` must be `i j k`")));
            }
            triangles.push([xs[0], xs[1], xs[2]]);
        }
        let mut boundary = Vec::with_capacity(nb);
        for k in 0..nb {
            let line = lines
                .next()
                .ok_or_else(|| Error::Validation(format!("missing boundary edge line {k}")))?;
            let xs: Vec<usize> = line
                .split_whitespace()
                .map(|t| {
                    t.parse().map_err(|_| Error::Validation(format!("bad edge line `{line}`")))
                })
                .collect::<Result<_>>()?;
            if xs.len() != 2 {
                return Err(Error::Validation(format!("edge line `{line}` must be `i j`")));
            }
            boundary.push([xs[0], xs[1]]);
        }
        Mesh::new(vertices, triangles, boundary)
    }
}

/// Structured mesh of the ellipse x^2/a^2 + y^2/b^2 <= 1: a centre vertex,
/// `n_rings` concentric scaled rings with `n_theta` nodes each, boundary
/// nodes exactly on the ellipse.
pub fn generate_ellipse_mesh(a: f64, b: f64, n_theta: usize, n_rings: usize) -> Result<Mesh> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::Parameter(format!("ellipse axes must be positive, got a={a} b={b}")));
    }
    if n_theta < 4 {
        return Err(Error::Parameter(format!("n_theta={n_theta} must be at least 4")));
    }
    if n_rings < 1 {
        return Err(Error::Parameter(format!("n_rings={n_rings} must be at least 1")));
    }
    let mut vertices = vec![[0.0, 0.0]];
    for ring in 1..=n_rings {
        let r = ring as f64 / n_rings as f64;
        for i in 0..n_theta {
            let th = 2.0 * std::f64::consts::PI * i as f64 / n_theta as f64;
            vertices.push([a * r * th.cos(), b * r * th.sin()]);
        }
    }
    let node = |ring: usize, i: usize| -> usize {
        if ring == 0 {
            0
        } else {
            1 + (ring - 1) * n_theta + (i % n_theta)
        }
    };
    let mut triangles = Vec::new();
    for i in 0..n_theta {
        triangles.push([0, node(1, i), node(1, i + 1)]);
    }
    for ring in 1..n_rings {
        for i in 0..n_theta {
            triangles.push([node(ring, i), node(ring + 1, i), node(ring + 1, i + 1)]);
            triangles.push([node(ring, i), node(ring + 1, i + 1), node(ring, i + 1)]);
        }
    }
    let boundary: Vec<[usize; 2]> =
        (0..n_theta).map(|i| [node(n_rings, i), node(n_rings, i + 1)]).collect();
    Mesh::new(vertices, triangles, boundary)
}

#[cfg(test)]
pub(crate) fn rect_mesh(nx: usize, ny: usize, w: f64, h: f64) -> Mesh {
    // structured [0,w]x[0,h] grid split into CCW triangles, for tests only
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([w * i as f64 / nx as f64, h * j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut boundary = Vec::new();
    for i in 0..nx {
        boundary.push([id(i, 0), id(i + 1, 0)]);
    }
    for j in 0..ny {
        boundary.push([id(nx, j), id(nx, j + 1)]);
    }
    for i in (0..nx).rev() {
        boundary.push([id(i + 1, ny), id(i, ny)]);
    }
    for j in (0..ny).rev() {
        boundary.push([id(0, j + 1), id(0, j)]);
    }
    Mesh::new(vertices, triangles, boundary).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::VectorField;
    use std::f64::consts::PI;

    #[test]
    fn minimal_disk_mesh() {
        let m = generate_ellipse_mesh(1.0, 1.0, 4, 1).unwrap();
        assert_eq!(m.num_vertices(), 5);
        assert_eq!(m.triangles().len(), 4);
        for t in 0..4 {
            assert!(m.triangle_area(t) > 0.0);
        }
        assert_eq!(m.boundary_nodes().len(), 4);
    }

    #[test]
    fn disk_area_converges_to_pi() {
        let m = generate_ellipse_mesh(1.0, 1.0, 256, 64).unwrap();
        assert!((m.area() - PI).abs() / PI < 0.005);
    }

    #[test]
    fn paper_ellipse_area_is_pi() {
        // a*b = 1 so the area target is pi
        let m = generate_ellipse_mesh(1.3, 1.0 / 1.3, 256, 64).unwrap();
        assert!((m.area() - PI).abs() / PI < 0.005);
    }

    #[test]
    fn reference_triangle_area() {
        let m = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![[0, 1], [1, 2], [2, 0]],
        )
        .unwrap();
        assert_eq!(m.area(), 0.5);
    }

    #[test]
    fn clockwise_triangle_rejected() {
        let err = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 2, 1]],
            vec![[0, 1], [1, 2], [2, 0]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn two_boundary_loops_rejected() {
        // two disjoint triangles: boundary forms two loops
        let err = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [3.0, 0.0], [4.0, 0.0], [3.0, 1.0]],
            vec![[0, 1, 2], [3, 4, 5]],
            vec![[0, 1], [1, 2], [2, 0], [3, 4], [4, 5], [5, 3]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let m = generate_ellipse_mesh(1.3, 1.0 / 1.3, 17, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("disk.mesh");
        m.save(&path).unwrap();
        let back = Mesh::load(&path).unwrap();
        assert_eq!(m.vertices(), back.vertices());
        assert_eq!(m.triangles(), back.triangles());
        assert_eq!(m.boundary_edges(), back.boundary_edges());
        assert_eq!(m.boundary_nodes(), back.boundary_nodes());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let m = generate_ellipse_mesh(1.0, 1.0, 4, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.mesh");
        m.save(&path).unwrap();
        let text = format!("# header comment\n\n{}", std::fs::read_to_string(&path).unwrap());
        let back = Mesh::parse(&text).unwrap();
        assert_eq!(m.vertices(), back.vertices());
    }

    #[test]
    fn deform_identity_and_dilation() {
        let m = generate_ellipse_mesh(1.0, 1.0, 64, 8).unwrap();
        let v = VectorField::from_fn(&m, |p| p);
        let same = m.deform(&v, 0.0).unwrap();
        assert_eq!(m.vertices(), same.vertices());
        let t = 0.25;
        let scaled = m.deform(&v, t).unwrap();
        let expect = (1.0 + t) * (1.0 + t) * m.area();
        assert!((scaled.area() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn deform_inversion_detected() {
        let m = generate_ellipse_mesh(1.0, 1.0, 8, 2).unwrap();
        let v = VectorField::from_fn(&m, |p| [-p[0], 0.0]);
        let err = m.deform(&v, 2.0).unwrap_err();
        match err {
            Error::Inversion { min_area } => assert!(min_area <= 0.0),
            other => panic!("expected inversion, got {other}"),
        }
    }

    #[test]
    fn normals_point_outward_and_weights_sum_to_perimeter() {
        let m = generate_ellipse_mesh(1.3, 1.0 / 1.3, 128, 8).unwrap();
        let geo = m.boundary_geometry(CurvatureMethod::Osculating).unwrap();
        let total: f64 = geo.weight.iter().sum();
        assert!((total - m.perimeter()).abs() < 1e-10 * m.perimeter());
        for (p, &b) in m.boundary_nodes().iter().enumerate() {
            let x = m.vertices()[b];
            let dot = geo.normal[p][0] * x[0] + geo.normal[p][1] * x[1];
            assert!(dot > 0.0, "normal at boundary node {b} points inward");
            let n = geo.normal[p];
            assert!(((n[0] * n[0] + n[1] * n[1]).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_curvature_both_methods() {
        let m = generate_ellipse_mesh(2.0, 2.0, 512, 24).unwrap();
        for method in [CurvatureMethod::Osculating, CurvatureMethod::NormalExtension] {
            let geo = m.boundary_geometry(method).unwrap();
            for &h in &geo.curvature {
                assert!((h - 0.5).abs() < 0.005, "{method:?}: H={h}");
            }
        }
    }

    #[test]
    fn ellipse_curvature_at_apex() {
        let (a, b) = (1.3, 1.0 / 1.3);
        let m = generate_ellipse_mesh(a, b, 512, 16).unwrap();
        let geo = m.boundary_geometry(CurvatureMethod::Osculating).unwrap();
        // boundary node 0 sits at (a, 0) where the curvature is a/b^2
        let p = m.boundary_position(m.boundary_nodes()[0]).unwrap();
        let expect = a / (b * b);
        assert!((geo.curvature[p] - expect).abs() < 0.02 * expect);
    }

    #[test]
    fn straight_segment_curvature_vanishes() {
        let m = rect_mesh(4, 4, 1.0, 1.0);
        let geo = m.boundary_geometry(CurvatureMethod::Osculating).unwrap();
        // node (2,0) is the midpoint of the bottom side
        let mid = m.boundary_position(2).unwrap();
        assert!(geo.curvature[mid].abs() <= 1e-8);
    }

    #[test]
    fn area_change_first_order_identity() {
        // area(m + tV) - area(m) ~ t * sum_b w_b V.n within 2% at t=1e-3
        let m = generate_ellipse_mesh(1.2, 0.9, 1024, 24).unwrap();
        let v = VectorField::from_fn(&m, |p| [p[0] + 0.3 * (p[1] * 2.0).sin(), p[1] - 0.2 * p[0]]);
        let t = 1e-3;
        let moved = m.deform(&v, t).unwrap();
        let geo = m.boundary_geometry(CurvatureMethod::Osculating).unwrap();
        let mut flux = 0.0;
        for (p, &bv) in m.boundary_nodes().iter().enumerate() {
            let vb = v.values()[bv];
            flux += geo.weight[p] * (vb[0] * geo.normal[p][0] + vb[1] * geo.normal[p][1]);
        }
        let fd = (moved.area() - m.area()) / t;
        assert!(
            (fd - flux).abs() <= 0.02 * flux.abs(),
            "first-order area identity: fd={fd} flux={flux}"
        );
    }

    #[test]
    fn quality_of_reference_triangle() {
        let m = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![[0, 1], [1, 2], [2, 0]],
        )
        .unwrap();
        let (angle, area) = m.quality();
        assert!((angle - 45.0).abs() < 1e-10);
        assert!((area - 0.5).abs() < 1e-15);
    }
}
