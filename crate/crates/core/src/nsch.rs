//! Navier–Stokes–Cahn–Hilliard coupling.
//!
//! A step first sweeps the phases with the decoupled engine, carrying an
//! intermediate velocity `u*` through the sweep, then solves one
//! velocity–pressure system with the mini element (P1 plus a cubic bubble per
//! triangle for velocity, P1 pressure). Bubbles are condensed out element by
//! element before the global solve and recovered afterwards. Density is 1.

use std::fmt;
use std::sync::Arc;

use crate::chemistry::ModelParams;
use crate::error::{Error, Result};
use crate::mesh_fe::{eliminate_dirichlet, FeSpace, SparseMatrix};
use crate::schemes::{decoupled_step, PhaseState, SchemeConfig, SchemeContext, SchemeId, Transport};

/// A velocity field given analytically.
#[derive(Clone)]
pub struct VelocityProfile {
    name: String,
    f: Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>,
}

impl VelocityProfile {
    pub fn new(name: impl Into<String>, f: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        VelocityProfile {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// Rotating cell on `[−0.125, 0.125]²`, tangential on the boundary.
    pub fn rotation() -> Self {
        VelocityProfile::new("rotation", rotation_profile)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        (self.f)(x, y)
    }
}

impl fmt::Debug for VelocityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VelocityProfile({})", self.name)
    }
}

pub fn rotation_profile(x: f64, y: f64) -> [f64; 2] {
    use std::f64::consts::PI;
    let a = 4.0 * PI * (x - 0.125);
    let b = 4.0 * PI * (y - 0.125);
    [
        2.0 * PI * a.sin().powi(2) * b.cos(),
        -4.0 * PI * a.sin() * a.cos() * b.sin(),
    ]
}

/// How the velocity interacts with the phases.
#[derive(Clone, Debug)]
pub enum VelocityMode {
    /// Full two-way coupling through `u*` and the flow solve.
    Coupled,
    /// Phases are advected by a fixed velocity; no flow solve.
    Prescribed(VelocityProfile),
    /// Phases see `u ≡ 0`; no flow solve.
    Zero,
}

#[derive(Clone, Debug)]
pub struct NschConfig {
    pub mode: VelocityMode,
    /// Dirichlet velocity data on the whole boundary; `None` is no-slip.
    pub boundary: Option<VelocityProfile>,
    /// Initial velocity; `None` starts at rest.
    pub initial: Option<VelocityProfile>,
}

impl Default for NschConfig {
    fn default() -> Self {
        NschConfig {
            mode: VelocityMode::Coupled,
            boundary: None,
            initial: None,
        }
    }
}

/// Mini-element velocity and P1 pressure.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    /// Bubble coefficients per triangle, both components.
    pub bubble: Vec<[f64; 2]>,
    pub pressure: Vec<f64>,
}

impl FlowState {
    pub fn zeros(space: &FeSpace) -> Self {
        let n = space.num_nodes();
        FlowState {
            ux: vec![0.0; n],
            uy: vec![0.0; n],
            bubble: vec![[0.0; 2]; space.mesh().num_triangles()],
            pressure: vec![0.0; n],
        }
    }

    /// Nodal interpolant of `profile`, bubbles zero.
    pub fn from_profile(space: &FeSpace, profile: &VelocityProfile) -> Self {
        let mut s = FlowState::zeros(space);
        for (k, v) in space.mesh().vertices.iter().enumerate() {
            let u = profile.eval(v[0], v[1]);
            s.ux[k] = u[0];
            s.uy[k] = u[1];
        }
        s
    }

    /// Velocity at every quadrature point.
    pub fn qp_values(&self, space: &FeSpace) -> Vec<[f64; 2]> {
        let basis = LocalBasis::new(space);
        let mesh = space.mesh();
        let nq = space.nq();
        let mut out = Vec::with_capacity(space.num_qp());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for q in 0..nq {
                let l = &basis.lambda[q];
                let b = basis.bubble[q];
                let mut u = [self.bubble[t][0] * b, self.bubble[t][1] * b];
                for a in 0..3 {
                    u[0] += self.ux[tri[a]] * l[a];
                    u[1] += self.uy[tri[a]] * l[a];
                }
                out.push(u);
            }
        }
        out
    }

    /// `½ ∫ |u|²`.
    pub fn kinetic_energy(&self, space: &FeSpace) -> f64 {
        let sq: Vec<f64> = self.qp_values(space).iter().map(|u| u[0] * u[0] + u[1] * u[1]).collect();
        0.5 * space.integrate_qp(&sq)
    }

    /// `max_k |(∇·u, λ_k)|` over the pressure basis.
    pub fn divergence_residual(&self, space: &FeSpace) -> f64 {
        let basis = LocalBasis::new(space);
        let mut res = vec![0.0; space.num_nodes()];
        for (t, tri) in space.mesh().triangles.iter().enumerate() {
            let g = space.grad_lambda(t);
            let area = space.area(t);
            let mut div_p1 = 0.0;
            for a in 0..3 {
                div_p1 += self.ux[tri[a]] * g[a][0] + self.uy[tri[a]] * g[a][1];
            }
            for (q, w) in space.rule().weights.iter().enumerate() {
                let gb = basis.bubble_grad(q, g);
                let div = div_p1 + self.bubble[t][0] * gb[0] + self.bubble[t][1] * gb[1];
                for a in 0..3 {
                    res[tri[a]] += area * w * div * basis.lambda[q][a];
                }
            }
        }
        res.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Reference-element values shared by all triangles.
struct LocalBasis {
    lambda: Vec<[f64; 3]>,
    bubble: Vec<f64>,
}

impl LocalBasis {
    fn new(space: &FeSpace) -> Self {
        let lambda = space.rule().points.clone();
        let bubble = lambda.iter().map(|l| 27.0 * l[0] * l[1] * l[2]).collect();
        LocalBasis { lambda, bubble }
    }

    fn bubble_grad(&self, q: usize, g: &[[f64; 2]; 3]) -> [f64; 2] {
        let l = &self.lambda[q];
        let c = [l[1] * l[2], l[0] * l[2], l[0] * l[1]];
        let mut out = [0.0; 2];
        for a in 0..3 {
            out[0] += 27.0 * c[a] * g[a][0];
            out[1] += 27.0 * c[a] * g[a][1];
        }
        out
    }
}

/// Mixture viscosity `Σ νᵢφᵢ`, clipped below at `min νᵢ / 10`.
pub fn mixture_viscosity(params: &ModelParams, phi: &[f64]) -> f64 {
    let floor = params.viscosity.iter().copied().fold(f64::INFINITY, f64::min) / 10.0;
    let nu: f64 = params.viscosity.iter().zip(phi).map(|(n, p)| n * p).sum();
    nu.max(floor)
}

/// Stabilized trilinear form `((w·∇)v, z) + ½((∇·w)v, z)`.
pub fn convection_form(space: &FeSpace, w: &FlowState, v: &FlowState, z: &FlowState) -> f64 {
    let basis = LocalBasis::new(space);
    let mut total = 0.0;
    for (t, tri) in space.mesh().triangles.iter().enumerate() {
        let g = space.grad_lambda(t);
        let area = space.area(t);
        for (q, wq) in space.rule().weights.iter().enumerate() {
            let gb = basis.bubble_grad(q, g);
            let eval = |s: &FlowState| -> ([f64; 2], [[f64; 2]; 2]) {
                let l = &basis.lambda[q];
                let b = basis.bubble[q];
                let mut u = [s.bubble[t][0] * b, s.bubble[t][1] * b];
                let mut du = [
                    [s.bubble[t][0] * gb[0], s.bubble[t][0] * gb[1]],
                    [s.bubble[t][1] * gb[0], s.bubble[t][1] * gb[1]],
                ];
                for a in 0..3 {
                    u[0] += s.ux[tri[a]] * l[a];
                    u[1] += s.uy[tri[a]] * l[a];
                    du[0][0] += s.ux[tri[a]] * g[a][0];
                    du[0][1] += s.ux[tri[a]] * g[a][1];
                    du[1][0] += s.uy[tri[a]] * g[a][0];
                    du[1][1] += s.uy[tri[a]] * g[a][1];
                }
                (u, du)
            };
            let (wu, wd) = eval(w);
            let (vu, vd) = eval(v);
            let (zu, _) = eval(z);
            let div = wd[0][0] + wd[1][1];
            let mut s = 0.0;
            for c in 0..2 {
                s += (wu[0] * vd[c][0] + wu[1] * vd[c][1] + 0.5 * div * vu[c]) * zu[c];
            }
            total += area * wq * s;
        }
    }
    total
}

/// Phase-field scheme plus flow configuration.
pub struct NschContext {
    pub phase: SchemeContext,
    pub config: NschConfig,
}

impl NschContext {
    pub fn new(space: Arc<FeSpace>, params: ModelParams, scheme: SchemeConfig, config: NschConfig) -> Result<Self> {
        if scheme.scheme == SchemeId::Ntc2 {
            return Err(Error::Parameter(
                "the flow coupling runs on the decoupled schemes (TD1, NTD1, NCOMP)".into(),
            ));
        }
        if params.viscosity.len() != params.num_phases() || params.viscosity.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Parameter("viscosities must be positive, one per phase".into()));
        }
        let phase = SchemeContext::new(space, params, scheme)?;
        Ok(NschContext { phase, config })
    }

    pub fn space(&self) -> &FeSpace {
        &self.phase.space
    }

    /// Flow state at `t = 0`.
    pub fn initial_flow(&self) -> FlowState {
        let space = self.space();
        match &self.config.mode {
            VelocityMode::Prescribed(p) => FlowState::from_profile(space, p),
            VelocityMode::Zero => FlowState::zeros(space),
            VelocityMode::Coupled => match &self.config.initial {
                Some(p) => FlowState::from_profile(space, p),
                None => FlowState::zeros(space),
            },
        }
    }

    pub fn step(&self, state: &PhaseState, flow: &FlowState) -> Result<(PhaseState, FlowState)> {
        self.step_dt(state, flow, self.phase.config.dt)
    }

    pub fn step_dt(&self, state: &PhaseState, flow: &FlowState, dt: f64) -> Result<(PhaseState, FlowState)> {
        let (next, ustar) = nsch_phase_substeps(self, state, flow, dt)?;
        let flow_next = match (&self.config.mode, ustar) {
            (VelocityMode::Coupled, Some(u)) => nsch_flow_step(self, state, flow, &u, dt)?,
            _ => flow.clone(),
        };
        Ok((next, flow_next))
    }
}

/// Phase sweep with transport. Returns the new phases and, in coupled mode,
/// the intermediate velocity `u*` at quadrature points after the last phase.
pub fn nsch_phase_substeps(
    ctx: &NschContext,
    state: &PhaseState,
    flow: &FlowState,
    dt: f64,
) -> Result<(PhaseState, Option<Vec<[f64; 2]>>)> {
    let space = ctx.space();
    if flow.ux.len() != space.num_nodes() || flow.bubble.len() != space.mesh().num_triangles() {
        return Err(Error::Dimension("flow state does not match the mesh".into()));
    }
    match &ctx.config.mode {
        VelocityMode::Coupled => {
            let mut ustar = flow.qp_values(space);
            let next = decoupled_step(&ctx.phase, state, dt, Transport::Coupled(&mut ustar))?;
            Ok((next, Some(ustar)))
        }
        VelocityMode::Prescribed(_) => {
            let u = flow.qp_values(space);
            Ok((decoupled_step(&ctx.phase, state, dt, Transport::Prescribed(&u))?, None))
        }
        VelocityMode::Zero => {
            let u = vec![[0.0; 2]; space.num_qp()];
            Ok((decoupled_step(&ctx.phase, state, dt, Transport::Prescribed(&u))?, None))
        }
    }
}

/// Per-triangle data kept for bubble recovery.
struct Condensed {
    s33: f64,
    s3: [f64; 3],
    g3: [[f64; 3]; 2],
    f3: [f64; 2],
}

/// Solves
///
/// ```text
/// (1/Δt)(uⁿ⁺¹ − u*, v) + c(uⁿ, uⁿ⁺¹, v) + (ν(φⁿ)∇uⁿ⁺¹, ∇v) + (∇pⁿ⁺¹, v) = 0
/// (∇·uⁿ⁺¹, q) = 0
/// ```
///
/// with Dirichlet velocity on the boundary and the pressure normalized to
/// zero mean.
pub fn nsch_flow_step(
    ctx: &NschContext,
    phases_old: &PhaseState,
    flow: &FlowState,
    ustar: &[[f64; 2]],
    dt: f64,
) -> Result<FlowState> {
    let space = ctx.space();
    let mesh = space.mesh();
    let n = space.num_nodes();
    let nq = space.nq();
    if ustar.len() != space.num_qp() {
        return Err(Error::Dimension("intermediate velocity has the wrong length".into()));
    }
    let basis = LocalBasis::new(space);
    let phi_qp: Vec<Vec<f64>> = phases_old.phi.iter().map(|f| space.qp_values(f)).collect();
    let mut point = vec![0.0; phi_qp.len()];

    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(mesh.num_triangles() * 81);
    let mut rhs = vec![0.0; 3 * n];
    let mut cond = Vec::with_capacity(mesh.num_triangles());

    for (t, tri) in mesh.triangles.iter().enumerate() {
        let g = space.grad_lambda(t);
        let area = space.area(t);
        // Old velocity gradient on the P1 part is constant per triangle.
        let mut dw_p1 = [[0.0; 2]; 2];
        for a in 0..3 {
            for d in 0..2 {
                dw_p1[0][d] += flow.ux[tri[a]] * g[a][d];
                dw_p1[1][d] += flow.uy[tri[a]] * g[a][d];
            }
        }
        let mut s = [[0.0; 4]; 4];
        let mut gm = [[[0.0; 3]; 4]; 2];
        let mut dm = [[[0.0; 4]; 3]; 2];
        let mut f = [[0.0; 4]; 2];
        for q in 0..nq {
            let wq = area * space.rule().weights[q];
            let l = basis.lambda[q];
            let gb = basis.bubble_grad(q, g);
            let psi = [l[0], l[1], l[2], basis.bubble[q]];
            let dpsi = [g[0], g[1], g[2], gb];
            let bt = flow.bubble[t];
            let mut w = [bt[0] * psi[3], bt[1] * psi[3]];
            for a in 0..3 {
                w[0] += flow.ux[tri[a]] * l[a];
                w[1] += flow.uy[tri[a]] * l[a];
            }
            let div_w = dw_p1[0][0] + dw_p1[1][1] + bt[0] * gb[0] + bt[1] * gb[1];
            for (j, v) in point.iter_mut().enumerate() {
                *v = phi_qp[j][t * nq + q];
            }
            let nu = mixture_viscosity(&ctx.phase.params, &point);
            for a in 0..4 {
                for b in 0..4 {
                    let conv = (w[0] * dpsi[b][0] + w[1] * dpsi[b][1]) * psi[a] + 0.5 * div_w * psi[b] * psi[a];
                    let visc = nu * (dpsi[a][0] * dpsi[b][0] + dpsi[a][1] * dpsi[b][1]);
                    s[a][b] += wq * (psi[a] * psi[b] / dt + visc + conv);
                }
                for c in 0..2 {
                    for k in 0..3 {
                        gm[c][a][k] += wq * psi[a] * g[k][c];
                        dm[c][k][a] += wq * l[k] * dpsi[a][c];
                    }
                    f[c][a] += wq * ustar[t * nq + q][c] * psi[a] / dt;
                }
            }
        }

        let s33 = s[3][3];
        let vel = |c: usize, a: usize| c * n + tri[a];
        let pre = |k: usize| 2 * n + tri[k];
        for c in 0..2 {
            for a in 0..3 {
                for b in 0..3 {
                    trip.push((vel(c, a), vel(c, b), s[a][b] - s[a][3] * s[3][b] / s33));
                }
                for k in 0..3 {
                    trip.push((vel(c, a), pre(k), gm[c][a][k] - s[a][3] * gm[c][3][k] / s33));
                }
                rhs[vel(c, a)] += f[c][a] - s[a][3] * f[c][3] / s33;
            }
            for k in 0..3 {
                for b in 0..3 {
                    trip.push((pre(k), vel(c, b), dm[c][k][b] - dm[c][k][3] * s[3][b] / s33));
                }
                for m in 0..3 {
                    trip.push((pre(k), pre(m), -dm[c][k][3] * gm[c][3][m] / s33));
                }
                rhs[pre(k)] -= dm[c][k][3] * f[c][3] / s33;
            }
        }
        cond.push(Condensed {
            s33,
            s3: [s[3][0], s[3][1], s[3][2]],
            g3: [
                [gm[0][3][0], gm[0][3][1], gm[0][3][2]],
                [gm[1][3][0], gm[1][3][1], gm[1][3][2]],
            ],
            f3: [f[0][3], f[1][3]],
        });
    }

    let mut a = SparseMatrix::from_triplets(3 * n, &trip)?;
    let mut dofs = Vec::with_capacity(2 * mesh.boundary_nodes.len() + 1);
    let mut vals = Vec::with_capacity(dofs.capacity());
    for &b in &mesh.boundary_nodes {
        let v = mesh.vertices[b];
        let u = ctx.config.boundary.as_ref().map_or([0.0; 2], |p| p.eval(v[0], v[1]));
        dofs.push(b);
        vals.push(u[0]);
        dofs.push(n + b);
        vals.push(u[1]);
    }
    dofs.push(2 * n);
    vals.push(0.0);
    eliminate_dirichlet(&mut a, &mut rhs, &dofs, &vals);
    let x = ctx.phase.solver().solve(&a, &rhs)?;

    let ux = x[..n].to_vec();
    let uy = x[n..2 * n].to_vec();
    let mut pressure = x[2 * n..].to_vec();
    let mean = space.integrate(&pressure) / mesh.domain.area();
    for p in &mut pressure {
        *p -= mean;
    }
    let bubble = mesh
        .triangles
        .iter()
        .zip(&cond)
        .map(|(tri, c)| {
            let mut out = [0.0; 2];
            for (comp, u) in [&ux, &uy].into_iter().enumerate() {
                let mut r = c.f3[comp];
                for a in 0..3 {
                    r -= c.s3[a] * u[tri[a]] + c.g3[comp][a] * x[2 * n + tri[a]];
                }
                out[comp] = r / c.s33;
            }
            out
        })
        .collect();
    Ok(FlowState {
        ux,
        uy,
        bubble,
        pressure,
    })
}
