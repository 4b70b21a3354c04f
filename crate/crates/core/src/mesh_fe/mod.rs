//! Structured triangulations, P1 finite-element assembly, quadrature and the
//! sparse linear-solve contract.
//!
//! Vertices are numbered lexicographically (`j * (nx + 1) + i`) and every
//! grid cell is split along its lower-left to upper-right diagonal, so the
//! mesh is fully determined by the rectangle and the two cell counts.

mod quadrature;
mod solver;
mod space;
mod sparse;

pub use quadrature::{gauss_legendre, TriangleRule};
pub use solver::{solve_sparse, LinearSolver, SolverConfig, SolverKind};
pub use space::{eliminate_dirichlet, FeSpace, Norms};
pub use sparse::{flatten_block_system, BlockEntry, BlockSystem, SparseMatrix};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn unit() -> Self {
        Rect::new(0.0, 1.0, 0.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Cell counts giving a characteristic size of at most `h`.
    pub fn cells_for_h(&self, h: f64) -> (usize, usize) {
        let nx = (self.width() / h - 1e-9).ceil().max(1.0) as usize;
        let ny = (self.height() / h - 1e-9).ceil().max(1.0) as usize;
        (nx, ny)
    }
}

/// Structured triangulation of a rectangle.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub domain: Rect,
    pub nx: usize,
    pub ny: usize,
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Sorted indices of vertices on the rectangle boundary.
    pub boundary_nodes: Vec<usize>,
    /// `max(dx, dy)`.
    pub h: f64,
}

impl Mesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Signed area of triangle `t` (positive for counterclockwise order).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary_nodes.binary_search(&v).is_ok()
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.vertices.iter().map(|p| f(p[0], p[1])).collect()
    }
}

/// Builds the structured triangulation of `domain` with `nx` by `ny` cells.
pub fn build_structured_mesh(domain: Rect, nx: usize, ny: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidDomain(format!(
            "cell counts must be positive, got nx={nx}, ny={ny}"
        )));
    }
    let finite = [domain.x0, domain.x1, domain.y0, domain.y1]
        .iter()
        .all(|v| v.is_finite());
    if !finite || domain.x1 <= domain.x0 || domain.y1 <= domain.y0 {
        return Err(Error::InvalidDomain(format!(
            "degenerate rectangle [{}, {}] x [{}, {}]",
            domain.x0, domain.x1, domain.y0, domain.y1
        )));
    }

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = lerp(domain.y0, domain.y1, j, ny);
        for i in 0..=nx {
            vertices.push([lerp(domain.x0, domain.x1, i, nx), y]);
        }
    }

    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let v00 = idx(i, j);
            let v10 = idx(i + 1, j);
            let v01 = idx(i, j + 1);
            let v11 = idx(i + 1, j + 1);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }

    let mut boundary_nodes = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            if i == 0 || j == 0 || i == nx || j == ny {
                boundary_nodes.push(idx(i, j));
            }
        }
    }

    let h = (domain.width() / nx as f64).max(domain.height() / ny as f64);
    Ok(Mesh {
        domain,
        nx,
        ny,
        vertices,
        triangles,
        boundary_nodes,
        h,
    })
}

fn lerp(a: f64, b: f64, k: usize, n: usize) -> f64 {
    if k == n {
        b
    } else {
        a + (b - a) * (k as f64 / n as f64)
    }
}

/// Exact P1 mass matrix.
pub fn assemble_mass(mesh: &Mesh) -> SparseMatrix {
    FeSpace::new(mesh.clone()).mass().finalized()
}

/// P1 stiffness matrix for the pure Neumann Laplacian.
pub fn assemble_stiffness(mesh: &Mesh) -> SparseMatrix {
    FeSpace::new(mesh.clone()).stiffness().finalized()
}

/// Mass matrix weighted by the P1 interpolant of a nodal `weight`.
pub fn assemble_weighted_mass(mesh: &Mesh, weight: &[f64]) -> Result<SparseMatrix> {
    let space = FeSpace::new(mesh.clone());
    space.check_nodal(weight, "weight")?;
    let w = space.qp_values(weight);
    Ok(space.weighted_mass_qp(&w).finalized())
}

/// `1ᵀ M v`.
pub fn integrate(mesh: &Mesh, field: &[f64]) -> Result<f64> {
    let space = FeSpace::new(mesh.clone());
    space.check_nodal(field, "field")?;
    Ok(space.integrate(field))
}

/// Discrete L², H¹ and nodal max norms.
pub fn norms(mesh: &Mesh, field: &[f64]) -> Result<Norms> {
    let space = FeSpace::new(mesh.clone());
    space.check_nodal(field, "field")?;
    Ok(space.norms(field))
}
