use tresca_shape::fem::{self, ScalarField, SmoothField, VectorField};
use tresca_shape::mesh::{generate_ellipse_mesh, CurvatureMethod};
use tresca_shape::shape::*;
use tresca_shape::vi::{self, SolverOptions};

struct PaperF;
impl SmoothField for PaperF {
    fn value(&self, p: [f64; 2]) -> f64 { (5.0 - p[0]*p[0] - p[1]*p[1] + p[0]*p[1]) / 4.0 }
    fn gradient(&self, p: [f64; 2]) -> [f64; 2] { [(-2.0*p[0]+p[1])/4.0, (-2.0*p[1]+p[0])/4.0] }
}
struct PaperG(f64);
impl SmoothField for PaperG {
    fn value(&self, p: [f64; 2]) -> f64 { self.0 * (1.0 + p[0].sin().powi(2)/0.8) }
    fn gradient(&self, p: [f64; 2]) -> [f64; 2] { [self.0*2.0*p[0].sin()*p[0].cos()/0.8, 0.0] }
}

fn main() {
    let opts = SolverOptions::default();
    for beta in [0.49, 0.01] {
        for (nt, nr) in [(128usize, 16usize), (192, 24), (256, 32), (384, 48)] {
            let m = generate_ellipse_mesh(1.0/1.3, 1.3, nt, nr).unwrap();
            let f = fem::interpolate(&m, |p| PaperF.value(p));
            let g = fem::interpolate(&m, |p| PaperG(beta).value(p));
            let (u, _) = vi::solve_tresca_switching(&m, &f, &g, None, &opts).unwrap();
            let geo = m.boundary_geometry(CurvatureMethod::Osculating).unwrap();
            let d = shape_gradient_density(&m, &u, &f, &g, &geo, &opts).unwrap();
            // three canonical fields: dilation, shear, localized bump
            let fields: Vec<VectorField> = vec![
                VectorField::from_fn(&m, |p| p),
                VectorField::from_fn(&m, |p| [p[1], p[0]]),
                VectorField::from_fn(&m, |p| {
                    let r2 = (p[0]-0.3).powi(2) + (p[1]-0.9).powi(2);
                    let s = (-4.0*r2).exp();
                    [s, 0.5*s]
                }),
            ];
            print!("beta={beta} nv={}:", m.num_vertices());
            for v in &fields {
                let volume = shape_gradient_volume(&m, &u, &PaperF, &PaperG(beta), v).unwrap();
                let mut paired = 0.0;
                for (p, &b) in m.boundary_nodes().iter().enumerate() {
                    let vb = v.values()[b];
                    let vn = vb[0]*geo.normal[p][0] + vb[1]*geo.normal[p][1];
                    paired += geo.weight[p] * d.values[p] * vn;
                }
                print!("  {:+.4}%", 100.0*(paired - volume)/volume.abs());
            }
            println!();
        }
    }
}
