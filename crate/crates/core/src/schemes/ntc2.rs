use super::{well_at, PhaseState, SchemeContext};
use crate::chemistry::{product_hessian, product_potential};
use crate::error::Result;
use crate::mesh_fe::{eliminate_dirichlet, BlockSystem, SparseMatrix};

/// Solves `M μ = (3ε/4) Σᵢ K φᵢ + ∫[(24/ε) Σᵢ f(φᵢ) + (24Λ/ε) gᵢ(φ) + p(φ)] v`
/// for every phase: the potential the coupled scheme reports when
/// `φⁿ⁺¹ = φⁿ`.
pub(super) fn consistent_potential(ctx: &SchemeContext, state: &PhaseState) -> Result<Vec<Vec<f64>>> {
    let space = &*ctx.space;
    let p = &ctx.params;
    let nphase = state.num_phases();
    let nqp = space.num_qp();
    let eps = p.epsilon;
    let qp: Vec<Vec<f64>> = state.phi.iter().map(|f| space.qp_values(f)).collect();
    let truncated = ctx.config.is_truncated();
    let mut out = Vec::with_capacity(nphase);
    let mut point = vec![0.0; nphase];
    for i in 0..nphase {
        let (f, _) = well_at(&qp[i], truncated);
        let g: Vec<f64> = (0..nqp)
            .map(|q| {
                for (j, v) in point.iter_mut().enumerate() {
                    *v = qp[j][q];
                }
                let (_, grad) = product_potential(&point);
                let pen = (point.iter().sum::<f64>() - 1.0) / p.lambda;
                24.0 / eps * p.sigma.values()[i] * f[q] + 24.0 * p.big_lambda / eps * grad[i] + pen
            })
            .collect();
        let mut b = space.load_qp(&g);
        let k = space.stiffness().matvec(&state.phi[i]);
        let c = 0.75 * eps * p.sigma.values()[i];
        for (bi, ki) in b.iter_mut().zip(k) {
            *bi += c * ki;
        }
        out.push(ctx.solver().solve(space.mass(), &b)?);
    }
    Ok(out)
}

/// Coupled Crank–Nicolson step with OD2 linearization of every nonlinear
/// term. Unknowns are ordered `(φ₁, μ₁, φ₂, μ₂, ...)` with `μ` the half-step
/// potential.
pub(super) fn ntc2_step(ctx: &SchemeContext, state: &PhaseState, dt: f64) -> Result<PhaseState> {
    let space = &*ctx.space;
    let p = &ctx.params;
    let n = space.num_nodes();
    let nphase = state.num_phases();
    let nqp = space.num_qp();
    let eps = p.epsilon;
    let lam = p.lambda;
    let sig = p.sigma.values();
    let mass = space.mass();
    let stiff = space.stiffness();
    let tau = ctx.tau_for(state);

    let mu_old = if state.mu_initialized {
        state.mu.clone()
    } else {
        consistent_potential(ctx, state)?
    };

    let qp: Vec<Vec<f64>> = state.phi.iter().map(|f| space.qp_values(f)).collect();
    let wells: Vec<(Vec<f64>, Vec<f64>)> = qp.iter().map(|v| well_at(v, false)).collect();

    // Hessian and gradient of the product potential at every quadrature point.
    let mut hess = vec![vec![0.0; nqp]; nphase * nphase];
    let mut grad = vec![vec![0.0; nqp]; nphase];
    let mut point = vec![0.0; nphase];
    for q in 0..nqp {
        for (j, v) in point.iter_mut().enumerate() {
            *v = qp[j][q];
        }
        let h = product_hessian(&point);
        let (_, g) = product_potential(&point);
        for k in 0..nphase * nphase {
            hess[k][q] = h[k];
        }
        for k in 0..nphase {
            grad[k][q] = g[k];
        }
    }

    let c_prod = 12.0 * p.big_lambda / eps;
    let c_pen = 0.5 / lam;
    let mut coupling: Vec<SparseMatrix> = Vec::with_capacity(nphase * nphase);
    for i in 0..nphase {
        for j in 0..nphase {
            let m = if j < i {
                coupling[j * nphase + i].clone()
            } else {
                let c_well = 12.0 * sig[i] / eps;
                let w: Vec<f64> = (0..nqp)
                    .map(|q| {
                        let mut v = c_prod * hess[i * nphase + j][q] + c_pen;
                        if i == j {
                            v += c_well * wells[i].1[q];
                        }
                        v
                    })
                    .collect();
                let mut m = space.weighted_mass_qp(&w);
                if i == j {
                    m.add_scaled(3.0 * eps / 8.0 * sig[i] + tau[i] * dt, stiff)?;
                }
                m
            };
            coupling.push(m);
        }
    }

    let mut sys = BlockSystem::new(2 * nphase, n);
    for i in 0..nphase {
        for j in 0..nphase {
            sys.add(2 * i, 2 * j, &coupling[i * nphase + j], 1.0);
        }
        sys.add(2 * i, 2 * i + 1, mass, -1.0);
        // μ rows scaled by −Δt; the Hessian blocks are symmetric, so the whole system is.
        sys.add(2 * i + 1, 2 * i, mass, -1.0);
        sys.add(2 * i + 1, 2 * i + 1, stiff, -dt * p.mobility[i]);
    }

    for i in 0..nphase {
        let c_well = 12.0 * sig[i] / eps;
        let (f, fp) = &wells[i];
        let g: Vec<f64> = (0..nqp)
            .map(|q| {
                let mut s = -2.0 * c_prod * grad[i][q] - 2.0 * c_well * f[q] + c_well * fp[q] * qp[i][q];
                let mut total = 0.0;
                for j in 0..nphase {
                    s += c_prod * hess[i * nphase + j][q] * qp[j][q];
                    total += qp[j][q];
                }
                s - (total - 1.0) / lam + c_pen * total
            })
            .collect();
        let load = space.load_qp(&g);
        let k_old = stiff.matvec(&state.phi[i]);
        let c = tau[i] * dt - 3.0 * eps / 8.0 * sig[i];
        let r = sys.rhs_block_mut(2 * i);
        for k in 0..n {
            r[k] = c * k_old[k] + load[k];
        }
        let m_old = mass.matvec(&state.phi[i]);
        let r = sys.rhs_block_mut(2 * i + 1);
        for k in 0..n {
            r[k] = -m_old[k];
        }
    }

    let mut flat = sys.assemble()?;
    let mut rhs = std::mem::take(&mut sys.rhs);
    if let Some(d) = ctx.config.dirichlet {
        let dofs: Vec<usize> = space.mesh().boundary_nodes.iter().map(|&b| 2 * d.phase * n + b).collect();
        eliminate_dirichlet(&mut flat, &mut rhs, &dofs, &vec![d.value; dofs.len()]);
    }
    let x = ctx.solver().solve_symmetric(&flat, &rhs)?;

    let mut phi = Vec::with_capacity(nphase);
    let mut mu = Vec::with_capacity(nphase);
    let mut mu_half = Vec::with_capacity(nphase);
    for i in 0..nphase {
        let ph = x[2 * i * n..(2 * i + 1) * n].to_vec();
        let mh = x[(2 * i + 1) * n..(2 * i + 2) * n].to_vec();
        mu.push(mh.iter().zip(&mu_old[i]).map(|(h, o)| 2.0 * h - o).collect());
        phi.push(ph);
        mu_half.push(mh);
    }
    Ok(PhaseState {
        t: state.t + dt,
        phi,
        mu,
        flux_mu: mu_half,
        mu_initialized: true,
        tau,
        initial_volumes: state.initial_volumes.clone(),
    })
}
