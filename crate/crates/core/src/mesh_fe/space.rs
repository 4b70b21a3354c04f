use super::quadrature::TriangleRule;
use super::solver::{LinearSolver, SolverConfig};
use super::sparse::SparseMatrix;
use super::Mesh;
use crate::error::{Error, Result};

/// Discrete norms of a nodal field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
}

/// P1 space on a mesh together with cached geometry, quadrature tables and
/// the shared sparsity pattern of every P1 operator.
///
/// Quadrature-point arrays are laid out triangle-major: entry `t * nq + q`
/// belongs to quadrature point `q` of triangle `t`.
pub struct FeSpace {
    mesh: Mesh,
    rule: TriangleRule,
    area: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
    pattern: SparseMatrix,
    scatter: Vec<[usize; 9]>,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    qp_coords: Vec<[f64; 2]>,
    projector: LinearSolver,
}

impl FeSpace {
    pub fn new(mesh: Mesh) -> Self {
        Self::with_rule(mesh, TriangleRule::standard())
    }

    pub fn with_rule(mesh: Mesh, rule: TriangleRule) -> Self {
        let nt = mesh.num_triangles();
        let mut area = Vec::with_capacity(nt);
        let mut grads = Vec::with_capacity(nt);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let a = mesh.signed_area(t);
            let p = tri.map(|v| mesh.vertices[v]);
            let two_a = 2.0 * a;
            grads.push([
                [(p[1][1] - p[2][1]) / two_a, (p[2][0] - p[1][0]) / two_a],
                [(p[2][1] - p[0][1]) / two_a, (p[0][0] - p[2][0]) / two_a],
                [(p[0][1] - p[1][1]) / two_a, (p[1][0] - p[0][0]) / two_a],
            ]);
            area.push(a);
        }

        let pattern = p1_pattern(&mesh);
        let scatter = mesh
            .triangles
            .iter()
            .map(|tri| {
                let mut pos = [0usize; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        pos[3 * a + b] = pattern
                            .position(tri[a], tri[b])
                            .expect("triangle pair missing from P1 pattern");
                    }
                }
                pos
            })
            .collect();

        let mut qp_coords = Vec::with_capacity(nt * rule.len());
        for tri in &mesh.triangles {
            let p = tri.map(|v| mesh.vertices[v]);
            for l in &rule.points {
                qp_coords.push([
                    l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                    l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                ]);
            }
        }

        let mut space = FeSpace {
            mesh,
            rule,
            area,
            grads,
            mass: pattern.clone(),
            stiffness: pattern.clone(),
            pattern,
            scatter,
            qp_coords,
            projector: LinearSolver::new(SolverConfig {
                tol: 1e-13,
                ..SolverConfig::default()
            }),
        };
        space.mass = space.exact_mass();
        space.stiffness = space.weighted_stiffness_qp(&vec![1.0; space.num_qp()]);
        space
    }

    fn exact_mass(&self) -> SparseMatrix {
        let mut m = self.pattern.clone();
        let vals = m.values_mut();
        for (t, pos) in self.scatter.iter().enumerate() {
            let a = self.area[t];
            for i in 0..3 {
                for j in 0..3 {
                    vals[pos[3 * i + j]] += if i == j { a / 6.0 } else { a / 12.0 };
                }
            }
        }
        m
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn rule(&self) -> &TriangleRule {
        &self.rule
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn nq(&self) -> usize {
        self.rule.len()
    }

    pub fn num_qp(&self) -> usize {
        self.mesh.num_triangles() * self.rule.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        self.area[t]
    }

    /// Gradients of the three barycentric coordinates on triangle `t`.
    pub fn grad_lambda(&self, t: usize) -> &[[f64; 2]; 3] {
        &self.grads[t]
    }

    pub fn qp_coords(&self) -> &[[f64; 2]] {
        &self.qp_coords
    }

    /// Zero matrix carrying the shared P1 pattern.
    pub fn pattern(&self) -> &SparseMatrix {
        &self.pattern
    }

    /// Exact P1 mass matrix on the shared pattern.
    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    /// P1 stiffness matrix on the shared pattern.
    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn check_nodal(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.num_nodes() {
            return Err(Error::Dimension(format!(
                "{what} has {} values, mesh has {} vertices",
                v.len(),
                self.num_nodes()
            )));
        }
        Ok(())
    }

    /// Values of the P1 interpolant of `nodal` at every quadrature point.
    pub fn qp_values(&self, nodal: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_qp());
        for tri in &self.mesh.triangles {
            let v = tri.map(|i| nodal[i]);
            for l in &self.rule.points {
                out.push(l[0] * v[0] + l[1] * v[1] + l[2] * v[2]);
            }
        }
        out
    }

    /// Piecewise-constant gradient of the P1 interpolant, one per triangle.
    pub fn element_gradients(&self, nodal: &[f64]) -> Vec<[f64; 2]> {
        self.mesh
            .triangles
            .iter()
            .zip(&self.grads)
            .map(|(tri, g)| {
                let mut out = [0.0; 2];
                for a in 0..3 {
                    out[0] += nodal[tri[a]] * g[a][0];
                    out[1] += nodal[tri[a]] * g[a][1];
                }
                out
            })
            .collect()
    }

    /// `∫ w u v` with `w` given at quadrature points.
    pub fn weighted_mass_qp(&self, w: &[f64]) -> SparseMatrix {
        debug_assert_eq!(w.len(), self.num_qp());
        let nq = self.nq();
        let mut m = self.pattern.clone();
        let vals = m.values_mut();
        for (t, pos) in self.scatter.iter().enumerate() {
            let a = self.area[t];
            let mut local = [0.0; 9];
            for (q, l) in self.rule.points.iter().enumerate() {
                let c = a * self.rule.weights[q] * w[t * nq + q];
                for i in 0..3 {
                    let ci = c * l[i];
                    for j in 0..3 {
                        local[3 * i + j] += ci * l[j];
                    }
                }
            }
            for k in 0..9 {
                vals[pos[k]] += local[k];
            }
        }
        m
    }

    /// `∫ w ∇u·∇v` with `w` given at quadrature points.
    pub fn weighted_stiffness_qp(&self, w: &[f64]) -> SparseMatrix {
        debug_assert_eq!(w.len(), self.num_qp());
        let nq = self.nq();
        let mut m = self.pattern.clone();
        let vals = m.values_mut();
        for (t, pos) in self.scatter.iter().enumerate() {
            let mut wsum = 0.0;
            for q in 0..nq {
                wsum += self.rule.weights[q] * w[t * nq + q];
            }
            let c = self.area[t] * wsum;
            let g = &self.grads[t];
            for i in 0..3 {
                for j in 0..3 {
                    vals[pos[3 * i + j]] += c * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
        m
    }

    /// Load vector `∫ g v` with `g` given at quadrature points.
    pub fn load_qp(&self, g: &[f64]) -> Vec<f64> {
        debug_assert_eq!(g.len(), self.num_qp());
        let nq = self.nq();
        let mut b = vec![0.0; self.num_nodes()];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let a = self.area[t];
            let mut local = [0.0; 3];
            for (q, l) in self.rule.points.iter().enumerate() {
                let c = a * self.rule.weights[q] * g[t * nq + q];
                for i in 0..3 {
                    local[i] += c * l[i];
                }
            }
            for i in 0..3 {
                b[tri[i]] += local[i];
            }
        }
        b
    }

    /// Load vector `∫ g · ∇v` for a vector field given at quadrature points.
    pub fn load_grad_qp(&self, g: &[[f64; 2]]) -> Vec<f64> {
        debug_assert_eq!(g.len(), self.num_qp());
        let nq = self.nq();
        let mut b = vec![0.0; self.num_nodes()];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let a = self.area[t];
            let mut s = [0.0; 2];
            for q in 0..nq {
                let w = self.rule.weights[q];
                s[0] += w * g[t * nq + q][0];
                s[1] += w * g[t * nq + q][1];
            }
            let gr = &self.grads[t];
            for i in 0..3 {
                b[tri[i]] += a * (s[0] * gr[i][0] + s[1] * gr[i][1]);
            }
        }
        b
    }

    /// `∫ g` with `g` given at quadrature points.
    pub fn integrate_qp(&self, g: &[f64]) -> f64 {
        let nq = self.nq();
        let mut total = 0.0;
        for t in 0..self.mesh.num_triangles() {
            let mut s = 0.0;
            for q in 0..nq {
                s += self.rule.weights[q] * g[t * nq + q];
            }
            total += self.area[t] * s;
        }
        total
    }

    /// `1ᵀ M v`.
    pub fn integrate(&self, v: &[f64]) -> f64 {
        self.mass.matvec(v).iter().sum()
    }

    pub fn norms(&self, v: &[f64]) -> Norms {
        let m = self.mass.bilinear(v, v).max(0.0);
        let k = self.stiffness.bilinear(v, v).max(0.0);
        Norms {
            l2: m.sqrt(),
            h1: (m + k).sqrt(),
            linf: v.iter().fold(0.0f64, |acc, x| acc.max(x.abs())),
        }
    }

    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.mesh.interpolate(f)
    }

    /// L² projection of an analytic function onto the P1 space.
    pub fn l2_project(&self, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
        let g: Vec<f64> = self.qp_coords.iter().map(|p| f(p[0], p[1])).collect();
        let b = self.load_qp(&g);
        self.projector.solve(&self.mass, &b)
    }
}

/// Row/column elimination of Dirichlet values on a square system.
///
/// The sparsity pattern is kept; eliminated entries are stored as zeros.
pub fn eliminate_dirichlet(a: &mut SparseMatrix, rhs: &mut [f64], dofs: &[usize], values: &[f64]) {
    let n = a.dim();
    let mut fixed = vec![None; n];
    for (&d, &g) in dofs.iter().zip(values) {
        fixed[d] = Some(g);
    }
    let row_ptr = a.row_ptr().to_vec();
    let col_idx = a.col_idx().to_vec();
    let vals = a.values_mut();
    for r in 0..n {
        let range = row_ptr[r]..row_ptr[r + 1];
        if let Some(g) = fixed[r] {
            for k in range {
                vals[k] = if col_idx[k] == r { 1.0 } else { 0.0 };
            }
            rhs[r] = g;
        } else {
            for k in range {
                if let Some(g) = fixed[col_idx[k]] {
                    rhs[r] -= vals[k] * g;
                    vals[k] = 0.0;
                }
            }
        }
    }
}

fn p1_pattern(mesh: &Mesh) -> SparseMatrix {
    let n = mesh.num_vertices();
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::with_capacity(7); n];
    for tri in &mesh.triangles {
        for &a in tri {
            for &b in tri {
                neighbours[a].push(b);
            }
        }
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    for row in &mut neighbours {
        row.sort_unstable();
        row.dedup();
        col_idx.extend_from_slice(row);
        row_ptr.push(col_idx.len());
    }
    let nnz = col_idx.len();
    SparseMatrix::from_csr(n, row_ptr, col_idx, vec![0.0; nnz]).expect("valid P1 pattern")
}

#[cfg(test)]
mod tests {
    use super::super::{
        assemble_mass, assemble_stiffness, assemble_weighted_mass, build_structured_mesh, integrate,
        norms, Rect,
    };
    use super::*;

    fn unit(n: usize) -> Mesh {
        build_structured_mesh(Rect::unit(), n, n).unwrap()
    }

    #[test]
    fn mass_totals_area() {
        let m = build_structured_mesh(Rect::new(-1.0, 2.0, 0.0, 0.5), 6, 4).unwrap();
        let mass = assemble_mass(&m);
        let ones = vec![1.0; m.num_vertices()];
        assert!((mass.bilinear(&ones, &ones) - 1.5).abs() < 1e-14);
        let small = assemble_mass(&unit(1));
        assert_eq!(small.dim(), 4);
        assert!(small.asymmetry() == 0.0);
        assert!(small.values().iter().all(|&v| v > 0.0));
        assert!((small.bilinear(&[1.0; 4], &[1.0; 4]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stiffness_kernel_and_energies() {
        let m = unit(5);
        let k = assemble_stiffness(&m);
        let ones = vec![1.0; m.num_vertices()];
        assert!(k.matvec(&ones).iter().all(|v| v.abs() < 1e-13));
        let x = m.interpolate(|x, _| x);
        assert!((k.bilinear(&x, &x) - 1.0).abs() < 1e-12);
        let xy = m.interpolate(|x, y| x + y);
        assert!((k.bilinear(&xy, &xy) - 2.0).abs() < 1e-12);
        assert!(k.is_structurally_symmetric());
    }

    #[test]
    fn weighted_mass_examples() {
        let m = unit(4);
        let n = m.num_vertices();
        let w1 = assemble_weighted_mass(&m, &vec![1.0; n]).unwrap();
        let mass = assemble_mass(&m);
        assert!(w1.same_pattern(&mass));
        for (a, b) in w1.values().iter().zip(mass.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let w0 = assemble_weighted_mass(&m, &vec![0.0; n]).unwrap();
        assert_eq!(w0.nnz(), 0);
        let wx = assemble_weighted_mass(&m, &m.interpolate(|x, _| x)).unwrap();
        let ones = vec![1.0; n];
        assert!((wx.bilinear(&ones, &ones) - 0.5).abs() < 1e-12);
        assert!(assemble_weighted_mass(&m, &[1.0; 3]).is_err());
    }

    #[test]
    fn integrate_examples() {
        let m = unit(3);
        assert!((integrate(&m, &vec![1.0; m.num_vertices()]).unwrap() - 1.0).abs() < 1e-14);
        assert!((integrate(&m, &m.interpolate(|x, _| x)).unwrap() - 0.5).abs() < 1e-12);
        let m64 = unit(64);
        let v = integrate(&m64, &m64.interpolate(|x, _| x * x)).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn norms_examples() {
        let m = unit(64);
        let n = m.num_vertices();
        let z = norms(&m, &vec![0.0; n]).unwrap();
        assert_eq!((z.l2, z.h1, z.linf), (0.0, 0.0, 0.0));
        let one = norms(&m, &vec![1.0; n]).unwrap();
        assert!((one.l2 - 1.0).abs() < 1e-13 && (one.h1 - 1.0).abs() < 1e-6 && one.linf == 1.0);
        let x = norms(&m, &m.interpolate(|x, _| x)).unwrap();
        assert!((x.l2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-3);
        assert_eq!(x.linf, 1.0);
    }

    #[test]
    fn projection_of_constant_is_exact() {
        let space = FeSpace::new(unit(6));
        let p = space.l2_project(|_, _| 0.37).unwrap();
        assert!(p.iter().all(|v| (v - 0.37).abs() < 1e-12));
    }

    #[test]
    fn projection_reproduces_linear_functions() {
        let space = FeSpace::new(unit(5));
        let p = space.l2_project(|x, y| 2.0 * x - y + 0.5).unwrap();
        let exact = space.interpolate(|x, y| 2.0 * x - y + 0.5);
        for (a, b) in p.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn load_matches_mass_times_nodal() {
        let space = FeSpace::new(unit(4));
        let v = space.interpolate(|x, y| (3.0 * x).sin() + y * y);
        let via_load = space.load_qp(&space.qp_values(&v));
        let via_mass = space.mass().matvec(&v);
        for (a, b) in via_load.iter().zip(&via_mass) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dirichlet_elimination_fixes_values() {
        let space = FeSpace::new(unit(3));
        let mut a = space.stiffness().clone();
        a.add_scaled(1.0, space.mass()).unwrap();
        let exact = space.interpolate(|x, y| 1.0 + x + 2.0 * y);
        let mut rhs = a.matvec(&exact);
        let bnd = space.mesh().boundary_nodes.clone();
        let vals: Vec<f64> = bnd.iter().map(|&b| exact[b]).collect();
        eliminate_dirichlet(&mut a, &mut rhs, &bnd, &vals);
        let x = LinearSolver::new(SolverConfig::default()).solve(&a, &rhs).unwrap();
        for (p, q) in x.iter().zip(&exact) {
            assert!((p - q).abs() < 1e-10);
        }
    }
}
