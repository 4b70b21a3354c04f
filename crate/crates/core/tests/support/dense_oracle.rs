//! Dense brute-force transcription of the weak forms on a 2×2-cell mesh.
//! The oracle builds its own mesh, quadrature, basis gradients and matrices
//! and solves with nalgebra. Each case returns the largest nodal deviation
//! of one library step from the oracle.

#![allow(dead_code, clippy::needless_range_loop)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use phasefield_core::mesh_fe::{build_structured_mesh, FeSpace, Rect};
use phasefield_core::schemes::{SchemeContext, SchemeId, TauMode};
use phasefield_core::{ModelParams, PhaseState, SchemeConfig};

pub const TOL: f64 = 1e-10;

/// Gauss–Legendre on [−1, 1], 5 points.
const GL_T: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_W: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

struct Qp {
    verts: [usize; 3],
    lambda: [f64; 3],
    weight: f64,
}

struct Dense {
    n: usize,
    qps: Vec<Qp>,
    mass: DMatrix<f64>,
    stiff: DMatrix<f64>,
}

impl Dense {
    /// Unit square split into 2×2 cells, each cut along its rising diagonal.
    fn new() -> Self {
        let n = 9;
        let xy = |v: usize| [(v % 3) as f64 * 0.5, (v / 3) as f64 * 0.5];
        let mut tris = Vec::new();
        for j in 0..2 {
            for i in 0..2 {
                let v00 = 3 * j + i;
                tris.push([v00, v00 + 1, v00 + 4]);
                tris.push([v00, v00 + 4, v00 + 3]);
            }
        }
        let mut qps = Vec::new();
        let mut stiff = DMatrix::zeros(n, n);
        for t in &tris {
            let p: Vec<[f64; 2]> = t.iter().map(|&v| xy(v)).collect();
            let jac = DMatrix::from_row_slice(2, 2, &[p[1][0] - p[0][0], p[2][0] - p[0][0], p[1][1] - p[0][1], p[2][1] - p[0][1]]);
            let det = jac.determinant();
            let area = det.abs() / 2.0;
            let inv_t = jac.try_inverse().unwrap().transpose();
            // Reference gradients of (1 − ξ − η, ξ, η) mapped to physical space.
            let refg = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
            let g: Vec<DVector<f64>> = refg
                .iter()
                .map(|r| &inv_t * DVector::from_column_slice(r))
                .collect();
            for a in 0..3 {
                for b in 0..3 {
                    stiff[(t[a], t[b])] += area * g[a].dot(&g[b]);
                }
            }
            for i in 0..5 {
                for k in 0..5 {
                    let x = 0.5 * (1.0 + GL_T[i]);
                    let y = 0.5 * (1.0 + GL_T[k]);
                    let eta = (1.0 - x) * y;
                    qps.push(Qp {
                        verts: *t,
                        lambda: [1.0 - x - eta, x, eta],
                        weight: 2.0 * area * (0.5 * GL_W[i]) * (0.5 * GL_W[k]) * (1.0 - x),
                    });
                }
            }
        }
        let mut d = Dense {
            n,
            qps,
            mass: DMatrix::zeros(n, n),
            stiff,
        };
        d.mass = d.weighted(|_| 1.0);
        d
    }

    fn at(&self, q: &Qp, f: &[f64]) -> f64 {
        (0..3).map(|a| f[q.verts[a]] * q.lambda[a]).sum()
    }

    fn weighted(&self, w: impl Fn(&Qp) -> f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for q in &self.qps {
            let c = q.weight * w(q);
            for a in 0..3 {
                for b in 0..3 {
                    m[(q.verts[a], q.verts[b])] += c * q.lambda[a] * q.lambda[b];
                }
            }
        }
        m
    }

    fn load(&self, g: impl Fn(&Qp) -> f64) -> DVector<f64> {
        let mut v = DVector::zeros(self.n);
        for q in &self.qps {
            let c = q.weight * g(q);
            for a in 0..3 {
                v[q.verts[a]] += c * q.lambda[a];
            }
        }
        v
    }
}

fn f_well(x: f64, truncated: bool) -> (f64, f64) {
    if truncated && x > 1.0 {
        (0.5 * (x - 1.0), 0.5)
    } else if truncated && x < 0.0 {
        (0.5 * x, 0.5)
    } else {
        let s = x - 0.5;
        (s * s * s - 0.25 * s, 3.0 * s * s - 0.25)
    }
}

struct Case {
    eps: f64,
    lam: f64,
    big: f64,
    mob: Vec<f64>,
    sig: Vec<f64>,
    dt: f64,
    tau: Vec<f64>,
}

impl Case {
    fn params(&self) -> ModelParams {
        ModelParams::new(self.eps, self.lam, self.big, self.mob.clone(), self.sig.clone()).unwrap()
    }
}

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

/// Sequential decoupled sweep with the lower-triangular penalty and the
/// product term split as `Πⱼ<ᵢ(φⱼⁿ⁺¹)² φᵢⁿ⁺½ Πₖ>ᵢ(φₖⁿ)²`.
fn oracle_decoupled(d: &Dense, c: &Case, phi0: &[Vec<f64>], truncated: bool) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = d.n;
    let np = phi0.len();
    let mut new: Vec<Vec<f64>> = Vec::new();
    let mut mus = Vec::new();
    let constraint: Vec<f64> = (0..n).map(|k| phi0.iter().map(|p| p[k]).sum::<f64>() - 1.0).collect();
    for i in 0..np {
        let prod = |q: &Qp| {
            let mut p = 1.0;
            for (j, f) in new.iter().enumerate() {
                debug_assert!(j < i);
                p *= d.at(q, f).powi(2);
            }
            for f in phi0.iter().skip(i + 1) {
                p *= d.at(q, f).powi(2);
            }
            p
        };
        let w_prod = d.weighted(prod);
        let w_fp = d.weighted(|q| f_well(d.at(q, &phi0[i]), truncated).1);
        let b_f = d.load(|q| f_well(d.at(q, &phi0[i]), truncated).0);
        let (e, s, l, b) = (c.eps, c.sig[i], c.lam, c.big);
        let old = v(&phi0[i]);

        let mut a = DMatrix::zeros(2 * n, 2 * n);
        let mut r = DVector::zeros(2 * n);
        // (δₜφ, μ̄) + M(∇μ, ∇μ̄) = 0
        a.view_mut((0, 0), (n, n)).copy_from(&(&d.mass / c.dt));
        a.view_mut((0, n), (n, n)).copy_from(&(&d.stiff * c.mob[i]));
        r.rows_mut(0, n).copy_from(&(&d.mass * &old / c.dt));
        // (3ε/4)Σ(∇φⁿ⁺½,∇φ̄) + τΔt(∇Δφ,∇φ̄) + (24Λ/ε)(prod φⁿ⁺½, φ̄)
        //   + (24Σ/ε)(f, φ̄) + (12Σ/ε)(f′Δφ, φ̄) + (1/λ)(Σφⁿ−1, φ̄)
        //   + (1/2λ)[2Σⱼ<ᵢ Δφⱼ + Δφᵢ, φ̄] = (μ, φ̄)
        let lhs = &d.stiff * (3.0 * e / 8.0 * s + c.tau[i] * c.dt) + &w_prod * (12.0 * b / e) + &w_fp * (12.0 * s / e) + &d.mass * (0.5 / l);
        a.view_mut((n, 0), (n, n)).copy_from(&lhs);
        a.view_mut((n, n), (n, n)).copy_from(&(-&d.mass));
        let mut rhs = &d.stiff * &old * (c.tau[i] * c.dt - 3.0 * e / 8.0 * s) - &w_prod * &old * (12.0 * b / e) - &b_f * (24.0 * s / e)
            + &w_fp * &old * (12.0 * s / e)
            - &d.mass * v(&constraint) / l
            + &d.mass * &old * (0.5 / l);
        for (j, f) in new.iter().enumerate() {
            rhs -= &d.mass * (v(f) - v(&phi0[j])) / l;
        }
        r.rows_mut(n, n).copy_from(&rhs);
        let x = a.lu().solve(&r).unwrap();
        new.push(x.rows(0, n).iter().copied().collect());
        mus.push(x.rows(n, n).iter().copied().collect());
    }
    (new, mus)
}

/// Coupled Crank–Nicolson system with the full Hessian of `½Πφ²`.
type Fields = Vec<Vec<f64>>;

fn oracle_ntc2(d: &Dense, c: &Case, phi0: &[Vec<f64>], mu0: &[Vec<f64>]) -> (Fields, Fields, Fields) {
    let n = d.n;
    let np = phi0.len();
    let vals = |q: &Qp| -> Vec<f64> { phi0.iter().map(|f| d.at(q, f)).collect() };
    let others = |x: &[f64], skip: &[usize]| -> f64 {
        (0..x.len()).filter(|k| !skip.contains(k)).map(|k| x[k] * x[k]).product()
    };
    let grad = |q: &Qp, i: usize| {
        let x = vals(q);
        x[i] * others(&x, &[i])
    };
    let hess = |q: &Qp, i: usize, j: usize| {
        let x = vals(q);
        if i == j {
            others(&x, &[i])
        } else {
            2.0 * x[i] * x[j] * others(&x, &[i, j])
        }
    };
    let constraint: Vec<f64> = (0..n).map(|k| phi0.iter().map(|p| p[k]).sum::<f64>() - 1.0).collect();
    let dim = 2 * np * n;
    let mut a = DMatrix::zeros(dim, dim);
    let mut r = DVector::zeros(dim);
    // Unknowns: [φ₁ … φ_N, μ₁^{n+½} … μ_N^{n+½}].
    let ph = |i: usize| i * n;
    let mu = |i: usize| (np + i) * n;
    let (e, l, b) = (c.eps, c.lam, c.big);
    for i in 0..np {
        let old = v(&phi0[i]);
        let s = c.sig[i];
        // Mass-balance rows.
        a.view_mut((ph(i), ph(i)), (n, n)).copy_from(&(&d.mass / c.dt));
        a.view_mut((ph(i), mu(i)), (n, n)).copy_from(&(&d.stiff * c.mob[i]));
        r.rows_mut(ph(i), n).copy_from(&(&d.mass * &old / c.dt));
        // Potential rows.
        let row = mu(i);
        let w_fp = d.weighted(|q| f_well(d.at(q, &phi0[i]), false).1);
        let mut rhs = &d.stiff * &old * (c.tau[i] * c.dt - 3.0 * e / 8.0 * s)
            - d.load(|q| grad(q, i)) * (24.0 * b / e)
            - d.load(|q| f_well(d.at(q, &phi0[i]), false).0) * (24.0 * s / e)
            + &w_fp * &old * (12.0 * s / e)
            - &d.mass * v(&constraint) / l;
        for j in 0..np {
            let h = d.weighted(|q| hess(q, i, j));
            let mut blk = &h * (12.0 * b / e) + &d.mass * (0.5 / l);
            rhs += &blk * v(&phi0[j]);
            if i == j {
                blk += &d.stiff * (3.0 * e / 8.0 * s + c.tau[i] * c.dt) + &w_fp * (12.0 * s / e);
            }
            a.view_mut((row, ph(j)), (n, n)).copy_from(&blk);
        }
        a.view_mut((row, mu(i)), (n, n)).copy_from(&(-&d.mass));
        r.rows_mut(row, n).copy_from(&rhs);
    }
    let x = a.lu().solve(&r).unwrap();
    let phi: Vec<Vec<f64>> = (0..np).map(|i| x.rows(ph(i), n).iter().copied().collect()).collect();
    let half: Vec<Vec<f64>> = (0..np).map(|i| x.rows(mu(i), n).iter().copied().collect()).collect();
    let full = half
        .iter()
        .zip(mu0)
        .map(|(h, o)| h.iter().zip(o).map(|(h, o)| 2.0 * h - o).collect())
        .collect();
    (phi, half, full)
}

/// `Mμ = (3ε/4)ΣKφ + ((24/ε)Σf + (24Λ/ε)∂F + p, v)`.
fn oracle_consistent_mu(d: &Dense, c: &Case, phi0: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (e, l, b) = (c.eps, c.lam, c.big);
    (0..phi0.len())
        .map(|i| {
            let g = d.load(|q| {
                let x: Vec<f64> = phi0.iter().map(|f| d.at(q, f)).collect();
                let others: f64 = (0..x.len()).filter(|&k| k != i).map(|k| x[k] * x[k]).product();
                24.0 / e * c.sig[i] * f_well(x[i], false).0
                    + 24.0 * b / e * x[i] * others
                    + (x.iter().sum::<f64>() - 1.0) / l
            });
            let rhs = &d.stiff * v(&phi0[i]) * (0.75 * e * c.sig[i]) + g;
            d.mass.clone().lu().solve(&rhs).unwrap().iter().copied().collect()
        })
        .collect()
}

fn library_state(space: &FeSpace, phi: &[Vec<f64>]) -> PhaseState {
    PhaseState::from_nodal(space, phi.to_vec()).unwrap()
}

fn space() -> Arc<FeSpace> {
    Arc::new(FeSpace::new(build_structured_mesh(Rect::unit(), 2, 2).unwrap()))
}

fn sample_phases(np: usize, spread: f64, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let base = 1.0 / np as f64;
    (0..np)
        .map(|_| (0..9).map(|_| base + spread * rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn case(np: usize) -> Case {
    Case {
        eps: 0.2,
        lam: 1e-2,
        big: 7.0,
        mob: (0..np).map(|i| 1e-2 * (1.0 + i as f64)).collect(),
        sig: [0.4, 1.6, 1.2, 0.8][..np].to_vec(),
        dt: 1e-3,
        tau: (0..np).map(|i| 0.3 * i as f64).collect(),
    }
}

fn decoupled_error(scheme: SchemeId, np: usize, truncated: bool, spread: f64, tau: TauMode, oracle_tau: Vec<f64>) -> f64 {
    let mut c = case(np);
    c.tau = oracle_tau;
    let s = space();
    let phi0 = sample_phases(np, spread, 11 + np as u64);
    let mut cfg = SchemeConfig::new(scheme, c.dt).with_tau(tau);
    cfg.truncated = truncated;
    cfg.solver.tol = 1e-13;
    let ctx = SchemeContext::new(s.clone(), c.params(), cfg).unwrap();
    let next = ctx.step(&library_state(&s, &phi0)).unwrap();
    let (phi, mu) = oracle_decoupled(&Dense::new(), &c, &phi0, truncated);
    max_diff(&next.phi, &phi).max(max_diff(&next.mu, &mu))
}

pub fn td1() -> f64 {
    let c = case(3);
    // Auto τ for the truncated scheme is 72MΣ²/ε².
    let tau = (0..3).map(|i| 72.0 * c.mob[i] * c.sig[i].powi(2) / c.eps.powi(2)).collect();
    // Nodal values leave [0, 1], so the truncation branches are exercised.
    decoupled_error(SchemeId::Td1, 3, true, 0.45, TauMode::Auto, tau)
}

pub fn ntd1() -> f64 {
    decoupled_error(SchemeId::Ntd1, 3, false, 0.2, TauMode::Zero, vec![0.0; 3]).max(decoupled_error(
        SchemeId::Ntd1,
        3,
        false,
        0.2,
        TauMode::Explicit(vec![0.5, 1.0, 2.0]),
        vec![0.5, 1.0, 2.0],
    ))
}

pub fn ncomp() -> f64 {
    [
        decoupled_error(SchemeId::Ncomp, 4, false, 0.15, TauMode::Zero, vec![0.0; 4]),
        decoupled_error(SchemeId::Ncomp, 4, true, 0.4, TauMode::Explicit(vec![1.0; 4]), vec![1.0; 4]),
        decoupled_error(SchemeId::Ncomp, 2, false, 0.2, TauMode::Zero, vec![0.0; 2]),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Given `μⁿ`, checks `φⁿ⁺¹`, `μⁿ⁺½` and `μⁿ⁺¹ = 2μⁿ⁺½ − μⁿ` for three and four phases.
pub fn ntc2() -> f64 {
    let mut worst: f64 = 0.0;
    for np in [3, 4] {
        let c = case(np);
        let s = space();
        let d = Dense::new();
        let phi0 = sample_phases(np, 0.2, 5);
        let mu0 = sample_phases(np, 3.0, 6);
        let mut cfg = SchemeConfig::new(SchemeId::Ntc2, c.dt).with_tau(TauMode::Explicit(c.tau.clone()));
        cfg.solver.tol = 1e-13;
        let ctx = SchemeContext::new(s.clone(), c.params(), cfg).unwrap();
        let mut state = library_state(&s, &phi0);
        state.mu = mu0.clone();
        state.mu_initialized = true;
        let next = ctx.step(&state).unwrap();
        let (phi, half, full) = oracle_ntc2(&d, &c, &phi0, &mu0);
        worst = worst
            .max(max_diff(&next.phi, &phi))
            .max(max_diff(&next.flux_mu, &half))
            .max(max_diff(&next.mu, &full));
    }
    worst
}

/// Without a stored potential the first step starts from the consistent `μ⁰`.
pub fn ntc2_initial_potential() -> f64 {
    let c = case(3);
    let s = space();
    let d = Dense::new();
    let phi0 = sample_phases(3, 0.2, 9);
    let mut cfg = SchemeConfig::new(SchemeId::Ntc2, c.dt).with_tau(TauMode::Zero);
    cfg.solver.tol = 1e-13;
    let ctx = SchemeContext::new(s.clone(), c.params(), cfg).unwrap();
    let state = library_state(&s, &phi0);
    let mu0 = oracle_consistent_mu(&d, &c, &phi0);
    let e0 = max_diff(&ctx.consistent_potential(&state).unwrap(), &mu0);
    let next = ctx.step(&state).unwrap();
    let mut zero = c;
    zero.tau = vec![0.0; 3];
    let (phi, _, full) = oracle_ntc2(&d, &zero, &phi0, &mu0);
    e0.max(max_diff(&next.phi, &phi)).max(max_diff(&next.mu, &full))
}

/// Name and maximum nodal deviation of one oracle comparison.
pub type Check = (&'static str, fn() -> f64);

pub const CASES: [Check; 5] = [
    ("TD1", td1),
    ("NTD1", ntd1),
    ("NCOMP", ncomp),
    ("NTC2", ntc2),
    ("NTC2 first step", ntc2_initial_potential),
];
