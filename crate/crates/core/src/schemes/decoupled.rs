use super::{well_at, PhaseState, SchemeContext};
use crate::error::Result;
use crate::mesh_fe::{eliminate_dirichlet, BlockSystem};

/// Advective contribution to the μ-rows of the decoupled sweep.
pub(crate) enum Transport<'a> {
    None,
    /// Prescribed velocity at quadrature points, treated explicitly.
    Prescribed(&'a [[f64; 2]]),
    /// Sequential intermediate velocity `u*ᵢ = u*ᵢ₋₁ − Δt φᵢⁿ ∇μᵢⁿ⁺¹`, updated
    /// in place after each phase. Holds `uⁿ` on entry.
    Coupled(&'a mut Vec<[f64; 2]>),
}

/// Sequential sweep over the phases. Phase `i` solves
///
/// ```text
/// [ A      -M  ] [φᵢⁿ⁺¹]   [r        ]
/// [ M/Δt  MᵢK  ] [μᵢⁿ⁺¹] = [M φᵢⁿ/Δt ]
/// ```
///
/// with `A = ((3ε/8)Σᵢ + τᵢΔt) K + W_a`, where `W_a` is the mass matrix
/// weighted by `(12Λ/ε) Πⱼ<ᵢ (φⱼⁿ⁺¹)² Πₖ>ᵢ (φₖⁿ)² + (12/ε) Σᵢ f′(φᵢⁿ) + 1/(2λ)`.
pub(crate) fn decoupled_step(
    ctx: &SchemeContext,
    state: &PhaseState,
    dt: f64,
    mut transport: Transport,
) -> Result<PhaseState> {
    let space = &*ctx.space;
    let p = &ctx.params;
    let n = space.num_nodes();
    let nphase = state.num_phases();
    let nqp = space.num_qp();
    let truncated = ctx.config.is_truncated();
    let tau = ctx.tau_for(state);
    let eps = p.epsilon;
    let lam = p.lambda;
    let big = p.big_lambda;
    let sig = p.sigma.values();
    let mass = space.mass();
    let stiff = space.stiffness();

    let old_qp: Vec<Vec<f64>> = state.phi.iter().map(|f| space.qp_values(f)).collect();
    let mut new_qp: Vec<Vec<f64>> = Vec::with_capacity(nphase);
    let mut phi_new: Vec<Vec<f64>> = Vec::with_capacity(nphase);
    let mut mu_new: Vec<Vec<f64>> = Vec::with_capacity(nphase);

    // Nodal p(φⁿ) plus the lower-triangular corrections accumulated so far.
    let mut penalty_nodal: Vec<f64> = (0..n)
        .map(|k| (state.phi.iter().map(|f| f[k]).sum::<f64>() - 1.0) / lam)
        .collect();

    for i in 0..nphase {
        let mut prod = vec![1.0; nqp];
        for vals in &new_qp {
            for (w, v) in prod.iter_mut().zip(vals) {
                *w *= v * v;
            }
        }
        for vals in old_qp.iter().skip(i + 1) {
            for (w, v) in prod.iter_mut().zip(vals) {
                *w *= v * v;
            }
        }
        let (f_old, fp_old) = well_at(&old_qp[i], truncated);
        let c_prod = 12.0 * big / eps;
        let c_well = 12.0 * sig[i] / eps;
        let c_pen = 0.5 / lam;

        let w_lhs: Vec<f64> = (0..nqp).map(|q| c_prod * prod[q] + c_well * fp_old[q] + c_pen).collect();
        let g_rhs: Vec<f64> = (0..nqp)
            .map(|q| {
                (-c_prod * prod[q] + c_well * fp_old[q] + c_pen) * old_qp[i][q]
                    - 2.0 * c_well * f_old[q]
            })
            .collect();

        let c_cap = 3.0 * eps / 8.0 * sig[i];
        let c_tau = tau[i] * dt;
        let mut a = space.weighted_mass_qp(&w_lhs);
        a.add_scaled(c_cap + c_tau, stiff)?;

        let k_old = stiff.matvec(&state.phi[i]);
        let load = space.load_qp(&g_rhs);
        let m_pen = mass.matvec(&penalty_nodal);
        let m_old = mass.matvec(&state.phi[i]);

        let transport_mat;
        let mut sys = BlockSystem::new(2, n);
        sys.add(0, 0, &a, 1.0);
        sys.add(0, 1, mass, -1.0);
        // The μ rows are scaled by −Δt so the block system is symmetric.
        sys.add(1, 0, mass, -1.0);
        sys.add(1, 1, stiff, -dt * p.mobility[i]);
        {
            let r = sys.rhs_block_mut(0);
            for k in 0..n {
                r[k] = (c_tau - c_cap) * k_old[k] + load[k] - m_pen[k];
            }
        }
        {
            let r = sys.rhs_block_mut(1);
            for k in 0..n {
                r[k] = -m_old[k];
            }
        }
        match &transport {
            Transport::None => {}
            Transport::Prescribed(u) => {
                let flux: Vec<[f64; 2]> =
                    (0..nqp).map(|q| [u[q][0] * old_qp[i][q], u[q][1] * old_qp[i][q]]).collect();
                let b = space.load_grad_qp(&flux);
                for (r, v) in sys.rhs_block_mut(1).iter_mut().zip(b) {
                    *r -= dt * v;
                }
            }
            Transport::Coupled(ustar) => {
                let sq: Vec<f64> = old_qp[i].iter().map(|v| v * v).collect();
                transport_mat = space.weighted_stiffness_qp(&sq);
                sys.add(1, 1, &transport_mat, -dt * dt);
                let flux: Vec<[f64; 2]> = (0..nqp)
                    .map(|q| [ustar[q][0] * old_qp[i][q], ustar[q][1] * old_qp[i][q]])
                    .collect();
                let b = space.load_grad_qp(&flux);
                for (r, v) in sys.rhs_block_mut(1).iter_mut().zip(b) {
                    *r -= dt * v;
                }
            }
        }

        let mut flat = sys.assemble()?;
        let mut rhs = std::mem::take(&mut sys.rhs);
        if let Some(d) = ctx.config.dirichlet.filter(|d| d.phase == i) {
            let dofs = &space.mesh().boundary_nodes;
            eliminate_dirichlet(&mut flat, &mut rhs, dofs, &vec![d.value; dofs.len()]);
        }
        let x = ctx.solver().solve_symmetric(&flat, &rhs)?;
        let phi_i = x[..n].to_vec();
        let mu_i = x[n..].to_vec();

        for k in 0..n {
            penalty_nodal[k] += (phi_i[k] - state.phi[i][k]) / lam;
        }
        if let Transport::Coupled(ustar) = &mut transport {
            let grads = space.element_gradients(&mu_i);
            let nq = space.nq();
            for (q, u) in ustar.iter_mut().enumerate() {
                let g = grads[q / nq];
                u[0] -= dt * old_qp[i][q] * g[0];
                u[1] -= dt * old_qp[i][q] * g[1];
            }
        }
        new_qp.push(space.qp_values(&phi_i));
        phi_new.push(phi_i);
        mu_new.push(mu_i);
    }

    Ok(PhaseState {
        t: state.t + dt,
        phi: phi_new,
        flux_mu: mu_new.clone(),
        mu: mu_new,
        mu_initialized: true,
        tau,
        initial_volumes: state.initial_volumes.clone(),
    })
}
