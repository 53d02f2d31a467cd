//! Plane-strain elasticity elements on the gap meshes.
//!
//! Displacements are vector P1 or P2 fields over straight-edged triangles;
//! the geometry map stays affine in both cases, so element Jacobians are
//! constant and the degree-4 quadrature below integrates every stiffness
//! entry exactly. Every boundary node carries Dirichlet data (the outer
//! boundary and the inclusion interface are both prescribed in each solve
//! of the decomposition), which reduces the discrete system to the free
//! interior block:
//!
//! ```text
//! K_ff u_f = -K_fc u_c
//! ```
//!
//! One factorization of `K_ff` therefore serves every right-hand side of
//! an experiment. Energy pairings `u^T K v` over the assembled full matrix
//! realize the volume bilinear form `(C e(u), e(v))` for any pair of
//! finite element fields, which is what the coefficient extraction
//! integrates.

use crate::error::{Error, Result};
use crate::geometry::GapProfile;
use crate::mesh::{BoundaryTag, Mesh};
use crate::skyline::{pcg_jacobi, rcm_order, LinearSolver, SkylineLdl, SymCsr};
use crate::tol::LINEAR_SOLVE_TOL;
use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Isotropic Lame pair for the plane-strain tensor
/// `C xi = lambda tr(xi) I + 2 mu xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticConstants {
    pub lambda: f64,
    pub mu: f64,
}

impl ElasticConstants {
    /// Requires strong ellipticity in the plane: `mu > 0` and
    /// `2 lambda + 2 mu > 0`.
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: format!("shear modulus must be positive, got {mu}"),
            });
        }
        if !(lambda + mu > 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("plane bulk modulus 2(lambda + mu) must be positive, got lambda = {lambda}"),
            });
        }
        Ok(ElasticConstants { lambda, mu })
    }

    /// Whether both ellipticity eigenvalues sit inside
    /// `[delta0, 1/delta0]`.
    pub fn admissible(&self, delta0: f64) -> bool {
        let hi = 2.0 * self.lambda + 2.0 * self.mu;
        delta0 <= self.mu && self.mu <= 1.0 / delta0 && delta0 <= hi && hi <= 1.0 / delta0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ElasticConstants {
            lambda: self.lambda * factor,
            mu: self.mu * factor,
        }
    }

    /// Voigt elasticity matrix acting on `(e_xx, e_yy, 2 e_xy)`.
    pub fn d_voigt(&self) -> Matrix3<f64> {
        let (l, m) = (self.lambda, self.mu);
        Matrix3::new(l + 2.0 * m, l, 0.0, l, l + 2.0 * m, 0.0, 0.0, 0.0, m)
    }
}

/// Applies the elasticity tensor to a (not necessarily symmetric) matrix.
pub fn lame_stress(c: &ElasticConstants, xi: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::identity() * (c.lambda * xi.trace()) + xi * (2.0 * c.mu)
}

/// Quadratic form `(C xi, xi)` of the elasticity tensor.
pub fn lame_inner(c: &ElasticConstants, xi: &Matrix2<f64>) -> f64 {
    (lame_stress(c, xi) * xi.transpose()).trace()
}

/// Degree-4 six-point triangle rule (barycentric points and unit-sum
/// weights); exact for the products of P2 shape gradients.
const QUAD_DEG4: [([f64; 3], f64); 6] = {
    const A: f64 = 0.445948490915965;
    const WA: f64 = 0.223381589678011;
    const B: f64 = 0.091576213509771;
    const WB: f64 = 0.109951743655322;
    [
        ([A, A, 1.0 - 2.0 * A], WA),
        ([A, 1.0 - 2.0 * A, A], WA),
        ([1.0 - 2.0 * A, A, A], WA),
        ([B, B, 1.0 - 2.0 * B], WB),
        ([B, 1.0 - 2.0 * B, B], WB),
        ([1.0 - 2.0 * B, B, B], WB),
    ]
};

/// Degree-2 midpoint rule, the natural match for P1 stiffness.
const QUAD_DEG2: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

fn quad_rule(p: u32) -> &'static [([f64; 3], f64)] {
    if p == 1 {
        &QUAD_DEG2
    } else {
        &QUAD_DEG4
    }
}

/// Scalar shape values at a barycentric point; vertex functions first,
/// then (for P2) the midside functions opposite the usual edge order
/// `01, 12, 20`.
fn shape_values(p: u32, l: [f64; 3]) -> Vec<f64> {
    if p == 1 {
        vec![l[0], l[1], l[2]]
    } else {
        vec![
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ]
    }
}

/// Scalar shape gradients given the (constant) barycentric gradients of
/// the affine cell.
fn shape_grads(p: u32, l: [f64; 3], g: &[[f64; 2]; 3]) -> Vec<[f64; 2]> {
    if p == 1 {
        return g.to_vec();
    }
    let mut out = Vec::with_capacity(6);
    for i in 0..3 {
        let f = 4.0 * l[i] - 1.0;
        out.push([f * g[i][0], f * g[i][1]]);
    }
    for (i, j) in [(0, 1), (1, 2), (2, 0)] {
        out.push([
            4.0 * (l[i] * g[j][0] + l[j] * g[i][0]),
            4.0 * (l[i] * g[j][1] + l[j] * g[i][1]),
        ]);
    }
    out
}

/// Vector finite element space over a mesh: P1 on the triangle corners or
/// P2 with shared midside nodes. Degrees of freedom interleave as
/// `2 * node + component`.
pub struct FemSpace {
    pub mesh: Mesh,
    pub p: u32,
    /// Coordinates of every scalar node (mesh corners, then midsides).
    pub coords: Vec<[f64; 2]>,
    /// Cell connectivity; 3 entries for P1, 6 for P2.
    pub cells: Vec<Vec<usize>>,
    /// Midside node of each undirected corner pair (P2 only).
    edge_mid: HashMap<(usize, usize), usize>,
}

impl FemSpace {
    pub fn new(mesh: Mesh, p: u32) -> Result<Self> {
        if !(1..=2).contains(&p) {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: format!("element order must be 1 or 2, got {p}"),
            });
        }
        let mut coords = mesh.nodes.clone();
        let mut edge_mid = HashMap::new();
        let mut cells = Vec::with_capacity(mesh.tris.len());
        for tri in &mesh.tris {
            let mut cell: Vec<usize> = tri.to_vec();
            if p == 2 {
                for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                    let k = (a.min(b), a.max(b));
                    let id = *edge_mid.entry(k).or_insert_with(|| {
                        coords.push([
                            0.5 * (mesh.nodes[a][0] + mesh.nodes[b][0]),
                            0.5 * (mesh.nodes[a][1] + mesh.nodes[b][1]),
                        ]);
                        coords.len() - 1
                    });
                    cell.push(id);
                }
            }
            cells.push(cell);
        }
        Ok(FemSpace {
            mesh,
            p,
            coords,
            cells,
            edge_mid,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn ndof(&self) -> usize {
        2 * self.coords.len()
    }

    /// Scalar nodes lying on tagged edges, including midside nodes.
    pub fn boundary_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut out = Vec::new();
        for &([a, b], t) in &self.mesh.boundary {
            if t != tag {
                continue;
            }
            out.push(a);
            out.push(b);
            if self.p == 2 {
                out.push(self.edge_mid[&(a.min(b), a.max(b))]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Constant barycentric gradients and area of an affine cell.
    fn cell_geometry(&self, c: usize) -> ([[f64; 2]; 3], f64) {
        let tri = &self.mesh.tris[c];
        let (a, b, q) = (
            self.mesh.nodes[tri[0]],
            self.mesh.nodes[tri[1]],
            self.mesh.nodes[tri[2]],
        );
        let two_a = (b[0] - a[0]) * (q[1] - a[1]) - (q[0] - a[0]) * (b[1] - a[1]);
        let g = [
            [(b[1] - q[1]) / two_a, (q[0] - b[0]) / two_a],
            [(q[1] - a[1]) / two_a, (a[0] - q[0]) / two_a],
            [(a[1] - b[1]) / two_a, (b[0] - a[0]) / two_a],
        ];
        (g, 0.5 * two_a)
    }

    /// Element stiffness for the given constants, ordered to match the
    /// interleaved cell degrees of freedom.
    fn element_stiffness(&self, c: usize, constants: &ElasticConstants) -> Vec<Vec<f64>> {
        let (g, area) = self.cell_geometry(c);
        let nn = self.cells[c].len();
        let d = constants.d_voigt();
        let mut ke = vec![vec![0.0; 2 * nn]; 2 * nn];
        for &(l, w) in quad_rule(self.p) {
            let grads = shape_grads(self.p, l, &g);
            // Voigt strain rows of each displacement dof.
            let mut b = vec![[0.0f64; 3]; 2 * nn];
            for (a, ga) in grads.iter().enumerate() {
                b[2 * a] = [ga[0], 0.0, ga[1]];
                b[2 * a + 1] = [0.0, ga[1], ga[0]];
            }
            let scale = w * area;
            for i in 0..2 * nn {
                let di = [
                    d[(0, 0)] * b[i][0] + d[(0, 1)] * b[i][1],
                    d[(1, 0)] * b[i][0] + d[(1, 1)] * b[i][1],
                    d[(2, 2)] * b[i][2],
                ];
                for j in 0..2 * nn {
                    ke[i][j] += scale * (di[0] * b[j][0] + di[1] * b[j][1] + di[2] * b[j][2]);
                }
            }
        }
        ke
    }

    /// Displacement gradient of a dof vector at a physical point.
    pub fn gradient_at(&self, u: &[f64], point: [f64; 2]) -> Result<Matrix2<f64>> {
        let (c, l) = self.mesh.locate(point).ok_or_else(|| {
            Error::Solve(format!("probe point ({}, {}) outside mesh", point[0], point[1]))
        })?;
        let (g, _) = self.cell_geometry(c);
        let grads = shape_grads(self.p, l, &g);
        let mut m = Matrix2::zeros();
        for (a, &node) in self.cells[c].iter().enumerate() {
            for comp in 0..2 {
                let val = u[2 * node + comp];
                m[(comp, 0)] += val * grads[a][0];
                m[(comp, 1)] += val * grads[a][1];
            }
        }
        Ok(m)
    }

    /// Displacement value of a dof vector at a physical point.
    pub fn value_at(&self, u: &[f64], point: [f64; 2]) -> Result<[f64; 2]> {
        let (c, l) = self.mesh.locate(point).ok_or_else(|| {
            Error::Solve(format!("probe point ({}, {}) outside mesh", point[0], point[1]))
        })?;
        let vals = shape_values(self.p, l);
        let mut out = [0.0; 2];
        for (a, &node) in self.cells[c].iter().enumerate() {
            for comp in 0..2 {
                out[comp] += vals[a] * u[2 * node + comp];
            }
        }
        Ok(out)
    }

    /// Interpolates a displacement field at every scalar node.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let mut u = vec![0.0; self.ndof()];
        for (n, &xy) in self.coords.iter().enumerate() {
            let v = f(xy);
            u[2 * n] = v[0];
            u[2 * n + 1] = v[1];
        }
        u
    }
}

/// Dirichlet data for a solve: one displacement function per boundary
/// tag. When the system constrains only the outer boundary, the
/// interface function is ignored.
pub struct DirichletData<'a> {
    pub outer: &'a dyn Fn([f64; 2]) -> [f64; 2],
    pub interface: &'a dyn Fn([f64; 2]) -> [f64; 2],
}

/// Which tagged node sets carry Dirichlet constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintSet {
    /// Decomposition problems: every boundary node is prescribed.
    OuterAndInterface,
    /// Two-material problems: the interface stays free and transmits
    /// continuity.
    OuterOnly,
}

enum Backend {
    Direct(SkylineLdl),
    Pcg(SymCsr),
}

/// Assembled, constrained, and factored elasticity system, ready to solve
/// against any boundary data.
pub struct ConstrainedSystem {
    pub space: FemSpace,
    /// Full stiffness over all degrees of freedom.
    pub k: SymCsr,
    outer_nodes: Vec<usize>,
    interface_nodes: Vec<usize>,
    free: Vec<usize>,
    backend: Backend,
}

impl ConstrainedSystem {
    /// Assembles the stiffness with per-cell constants and factors the
    /// free block, constraining every boundary node.
    pub fn build(
        space: FemSpace,
        constants: &dyn Fn(usize) -> ElasticConstants,
        solver: LinearSolver,
    ) -> Result<Self> {
        Self::build_with_constraints(space, constants, solver, ConstraintSet::OuterAndInterface)
    }

    /// Assembly with an explicit choice of constrained node sets.
    pub fn build_with_constraints(
        space: FemSpace,
        constants: &dyn Fn(usize) -> ElasticConstants,
        solver: LinearSolver,
        constraint_set: ConstraintSet,
    ) -> Result<Self> {
        let ndof = space.ndof();
        let mut triplets = Vec::new();
        for c in 0..space.cells.len() {
            let ke = space.element_stiffness(c, &constants(c));
            let nodes = &space.cells[c];
            for (i, row) in ke.iter().enumerate() {
                let gi = 2 * nodes[i / 2] + i % 2;
                for (j, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        triplets.push((gi, 2 * nodes[j / 2] + j % 2, v));
                    }
                }
            }
        }
        let k = SymCsr::from_triplets(ndof, &triplets)?;
        let outer_nodes = space.boundary_nodes(BoundaryTag::Outer);
        let interface_nodes = match constraint_set {
            ConstraintSet::OuterAndInterface => space.boundary_nodes(BoundaryTag::Interface),
            ConstraintSet::OuterOnly => Vec::new(),
        };
        let mut constrained = vec![false; ndof];
        for &n in outer_nodes.iter().chain(&interface_nodes) {
            constrained[2 * n] = true;
            constrained[2 * n + 1] = true;
        }
        let free: Vec<usize> = (0..ndof).filter(|&d| !constrained[d]).collect();
        let mut free_index = vec![usize::MAX; ndof];
        for (r, &d) in free.iter().enumerate() {
            free_index[d] = r;
        }
        // Reduced block over the free dofs.
        let mut reduced_triplets = Vec::new();
        for (r, &d) in free.iter().enumerate() {
            for kk in k.row_ptr[d]..k.row_ptr[d + 1] {
                let j = k.cols[kk];
                if free_index[j] != usize::MAX {
                    reduced_triplets.push((r, free_index[j], k.vals[kk]));
                }
            }
        }
        let reduced = SymCsr::from_triplets(free.len(), &reduced_triplets)?;
        let backend = match solver {
            LinearSolver::Direct => {
                let perm = rcm_order(&reduced);
                Backend::Direct(SkylineLdl::factor(&reduced, perm, 1e-14)?)
            }
            LinearSolver::Pcg => Backend::Pcg(reduced),
        };
        Ok(ConstrainedSystem {
            space,
            k,
            outer_nodes,
            interface_nodes,
            free,
            backend,
        })
    }

    /// Full-length vector holding the boundary data on constrained dofs.
    fn constrained_vector(&self, data: &DirichletData) -> Vec<f64> {
        let mut u = vec![0.0; self.space.ndof()];
        for &n in &self.outer_nodes {
            let v = (data.outer)(self.space.coords[n]);
            u[2 * n] = v[0];
            u[2 * n + 1] = v[1];
        }
        for &n in &self.interface_nodes {
            let v = (data.interface)(self.space.coords[n]);
            u[2 * n] = v[0];
            u[2 * n + 1] = v[1];
        }
        u
    }

    /// Solves with the stored factorization: lifts the boundary data,
    /// forms `-K_fc u_c`, and back-substitutes the free block.
    pub fn solve(&self, data: &DirichletData) -> Result<Vec<f64>> {
        let mut u = self.constrained_vector(data);
        let mut ku = vec![0.0; self.space.ndof()];
        self.k.matvec(&u, &mut ku);
        let rhs: Vec<f64> = self.free.iter().map(|&d| -ku[d]).collect();
        let x = match &self.backend {
            Backend::Direct(f) => f.solve(&rhs),
            Backend::Pcg(reduced) => {
                let iters = 40 * reduced.n + 200;
                pcg_jacobi(reduced, &rhs, LINEAR_SOLVE_TOL, iters)?.0
            }
        };
        for (r, &d) in self.free.iter().enumerate() {
            u[d] = x[r];
        }
        Ok(u)
    }

    /// Volume energy pairing `u^T K v = (C e(u), e(v))` over the meshed
    /// domain.
    pub fn energy_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut kv = vec![0.0; self.space.ndof()];
        self.k.matvec(v, &mut kv);
        u.iter().zip(&kv).map(|(a, b)| a * b).sum()
    }

    /// Residual infinity norm of the free equations, a direct check that
    /// a returned field actually solves the constrained system.
    pub fn free_residual(&self, u: &[f64]) -> f64 {
        let mut ku = vec![0.0; self.space.ndof()];
        self.k.matvec(u, &mut ku);
        self.free
            .iter()
            .map(|&d| ku[d].abs())
            .fold(0.0f64, f64::max)
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }
}

/// Relative H1 distance between two dof vectors on the same space,
/// integrating values and gradients with the element quadrature.
pub fn h1_relative_error(space: &FemSpace, u: &[f64], reference: &[f64]) -> f64 {
    let mut err = 0.0;
    let mut base = 0.0;
    for c in 0..space.cells.len() {
        let (g, area) = space.cell_geometry(c);
        for &(l, w) in quad_rule(space.p) {
            let vals = shape_values(space.p, l);
            let grads = shape_grads(space.p, l, &g);
            let mut dv = [0.0f64; 2];
            let mut dgrad = [0.0f64; 4];
            let mut rv = [0.0f64; 2];
            let mut rgrad = [0.0f64; 4];
            for (a, &node) in space.cells[c].iter().enumerate() {
                for comp in 0..2 {
                    let du = u[2 * node + comp] - reference[2 * node + comp];
                    let re = reference[2 * node + comp];
                    dv[comp] += vals[a] * du;
                    rv[comp] += vals[a] * re;
                    dgrad[2 * comp] += grads[a][0] * du;
                    dgrad[2 * comp + 1] += grads[a][1] * du;
                    rgrad[2 * comp] += grads[a][0] * re;
                    rgrad[2 * comp + 1] += grads[a][1] * re;
                }
            }
            let scale = w * area;
            err += scale
                * (dv.iter().map(|x| x * x).sum::<f64>()
                    + dgrad.iter().map(|x| x * x).sum::<f64>());
            base += scale
                * (rv.iter().map(|x| x * x).sum::<f64>()
                    + rgrad.iter().map(|x| x * x).sum::<f64>());
        }
    }
    (err / base.max(1e-300)).sqrt()
}

/// Restricts a dof vector from a space whose mesh contains the target
/// mesh's cells (a region submesh) onto the smaller space. Corner and
/// midside coordinates are produced by identical arithmetic in both
/// spaces, so bit-exact coordinate matching recovers the node
/// correspondence without interpolation.
pub fn restrict_to(target: &FemSpace, source: &FemSpace, u_source: &[f64]) -> Result<Vec<f64>> {
    let key = |p: [f64; 2]| (p[0].to_bits(), p[1].to_bits());
    let mut by_coord: HashMap<(u64, u64), usize> = HashMap::with_capacity(source.coords.len());
    for (n, &p) in source.coords.iter().enumerate() {
        by_coord.insert(key(p), n);
    }
    let mut out = vec![0.0; target.ndof()];
    for (n, &p) in target.coords.iter().enumerate() {
        let src = *by_coord.get(&key(p)).ok_or_else(|| {
            Error::Solve(format!(
                "node ({}, {}) of the restricted space is missing upstream",
                p[0], p[1]
            ))
        })?;
        out[2 * n] = u_source[2 * src];
        out[2 * n + 1] = u_source[2 * src + 1];
    }
    Ok(out)
}

/// Number of sample points along each probe fiber.
pub const PROBE_COUNT: usize = 17;

/// Probe fibers for the two candidate blow-up loci: the shortest segment
/// between the boundaries (through the contact set) and the vertical
/// fiber at the gap-layer abscissa where the cylinder-surface rate is
/// read. Points sit at heights `t = (i+1)/18` of the local gap.
pub struct ProbeFibers {
    pub shortest_line: Vec<[f64; 2]>,
    pub cylinder: Vec<[f64; 2]>,
}

pub fn probe_points(profile: &GapProfile, eps: f64, cs_x: f64) -> ProbeFibers {
    let fiber = |x: f64| -> Vec<[f64; 2]> {
        let delta = profile.gap_thickness(x, eps);
        (0..PROBE_COUNT)
            .map(|i| [x, delta * (i + 1) as f64 / (PROBE_COUNT + 1) as f64])
            .collect()
    };
    ProbeFibers {
        shortest_line: fiber(0.0),
        cylinder: fiber(cs_x),
    }
}

/// Frobenius norms of the displacement gradient along a list of points.
pub fn gradient_magnitudes(space: &FemSpace, u: &[f64], points: &[[f64; 2]]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|&p| Ok(space.gradient_at(u, p)?.norm()))
        .collect()
}
