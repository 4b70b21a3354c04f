//! Energies, numerical dissipation, constraint monitors and convergence tables.
//!
//! Every nonlinear integrand here is evaluated with the same quadrature the
//! schemes use, so the discrete energy identities hold to rounding error.

use crate::chemistry::{potential, product_hessian, product_potential, ModelParams};
use crate::error::{Error, Result};
use crate::mesh_fe::FeSpace;
use crate::schemes::{PhaseState, SchemeConfig, SchemeId};

/// Contributions to the free energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyParts {
    /// `Σᵢ (3ε/8) Σᵢ ‖∇φᵢ‖²`.
    pub gradient: f64,
    /// `(24/ε) Σᵢ Σᵢ ∫F(φᵢ)`.
    pub well: f64,
    /// `(24Λ/ε) ∫ ½Πφᵢ²`.
    pub product: f64,
    /// `∫ (1/2λ)(Σφᵢ − 1)²`.
    pub penalty: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.gradient + self.well + self.product + self.penalty
    }
}

pub fn energy_parts(space: &FeSpace, phi: &[Vec<f64>], params: &ModelParams, truncated: bool) -> EnergyParts {
    let eps = params.epsilon;
    let sig = params.sigma.values();
    let k = space.stiffness();
    let nqp = space.num_qp();
    let gradient = phi
        .iter()
        .zip(sig)
        .map(|(f, s)| 3.0 * eps / 8.0 * s * k.bilinear(f, f))
        .sum();
    let qp: Vec<Vec<f64>> = phi.iter().map(|f| space.qp_values(f)).collect();
    let mut well_density = vec![0.0; nqp];
    let mut product_density = vec![0.0; nqp];
    let mut penalty_density = vec![0.0; nqp];
    let mut point = vec![0.0; phi.len()];
    for q in 0..nqp {
        let mut w = 0.0;
        for (j, v) in point.iter_mut().enumerate() {
            *v = qp[j][q];
            w += sig[j] * potential(*v, truncated).0;
        }
        well_density[q] = w;
        product_density[q] = product_potential(&point).0;
        let c = point.iter().sum::<f64>() - 1.0;
        penalty_density[q] = c * c;
    }
    EnergyParts {
        gradient,
        well: 24.0 / eps * space.integrate_qp(&well_density),
        product: 24.0 * params.big_lambda / eps * space.integrate_qp(&product_density),
        penalty: space.integrate_qp(&penalty_density) / (2.0 * params.lambda),
    }
}

/// Free energy `E`, or `Ẽ` with the truncated double well.
pub fn energy(space: &FeSpace, state: &PhaseState, params: &ModelParams, truncated: bool) -> f64 {
    energy_parts(space, &state.phi, params, truncated).total()
}

/// Numerical dissipation of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Dissipation {
    /// Per-phase double-well dissipation.
    pub nd: Vec<f64>,
    /// Product-potential dissipation (coupled scheme only).
    pub nd_product: f64,
    /// `τᵢ ‖∇(φᵢⁿ⁺¹ − φᵢⁿ)‖²`.
    pub stabilization: Vec<f64>,
    pub tnd: f64,
}

/// Dissipation introduced by the time discretization between two states.
pub fn numerical_dissipation(
    space: &FeSpace,
    old: &PhaseState,
    new: &PhaseState,
    params: &ModelParams,
    config: &SchemeConfig,
    dt: f64,
) -> Dissipation {
    let eps = params.epsilon;
    let sig = params.sigma.values();
    let nphase = old.num_phases();
    let truncated = config.is_truncated();
    let k = space.stiffness();
    let old_qp: Vec<Vec<f64>> = old.phi.iter().map(|f| space.qp_values(f)).collect();
    let new_qp: Vec<Vec<f64>> = new.phi.iter().map(|f| space.qp_values(f)).collect();
    let nqp = space.num_qp();

    let mut nd = Vec::with_capacity(nphase);
    let mut stabilization = Vec::with_capacity(nphase);
    for i in 0..nphase {
        let density: Vec<f64> = (0..nqp)
            .map(|q| {
                let (a, b) = (old_qp[i][q], new_qp[i][q]);
                let (fa, ga, gpa) = potential(a, truncated);
                let fb = potential(b, truncated).0;
                let d = b - a;
                (ga + 0.5 * gpa * d) * d - (fb - fa)
            })
            .collect();
        nd.push(24.0 / eps * sig[i] * space.integrate_qp(&density) / dt);
        let diff: Vec<f64> = new.phi[i].iter().zip(&old.phi[i]).map(|(a, b)| a - b).collect();
        stabilization.push(new.tau.get(i).copied().unwrap_or(0.0) * k.bilinear(&diff, &diff));
    }

    let nd_product = if config.scheme == SchemeId::Ntc2 {
        let mut a = vec![0.0; nphase];
        let mut b = vec![0.0; nphase];
        let density: Vec<f64> = (0..nqp)
            .map(|q| {
                for j in 0..nphase {
                    a[j] = old_qp[j][q];
                    b[j] = new_qp[j][q];
                }
                let (fa, ga) = product_potential(&a);
                let fb = product_potential(&b).0;
                let h = product_hessian(&a);
                let mut s = 0.0;
                for i in 0..nphase {
                    let mut lin = ga[i];
                    for j in 0..nphase {
                        lin += 0.5 * h[i * nphase + j] * (b[j] - a[j]);
                    }
                    s += lin * (b[i] - a[i]);
                }
                s - (fb - fa)
            })
            .collect();
        24.0 * params.big_lambda / eps * space.integrate_qp(&density) / dt
    } else {
        0.0
    };

    let tnd = nd.iter().sum::<f64>() + nd_product + stabilization.iter().sum::<f64>();
    Dissipation {
        nd,
        nd_product,
        stabilization,
        tnd,
    }
}

/// Physical dissipation `Σᵢ Mᵢ ‖∇μᵢ‖²` of the potentials driving the step.
pub fn physical_dissipation(space: &FeSpace, state: &PhaseState, params: &ModelParams) -> f64 {
    let k = space.stiffness();
    state
        .flux_mu
        .iter()
        .zip(&params.mobility)
        .map(|(mu, m)| m * k.bilinear(mu, mu))
        .sum()
}

/// `δₜE + Σᵢ cMᵢ‖∇μᵢ‖²` with the energy variant and coefficient `c` of the
/// scheme's stability statement: `Ẽ` and `c = ½` when truncated, otherwise
/// `E` and `c = 1`.
pub fn energy_law_residual(
    space: &FeSpace,
    old: &PhaseState,
    new: &PhaseState,
    params: &ModelParams,
    config: &SchemeConfig,
    dt: f64,
) -> f64 {
    let truncated = config.is_truncated();
    let c = if truncated && config.scheme != SchemeId::Ntc2 { 0.5 } else { 1.0 };
    let de = (energy(space, new, params, truncated) - energy(space, old, params, truncated)) / dt;
    de + c * physical_dissipation(space, new, params)
}

/// `δₜE + Σᵢ Mᵢ‖∇μᵢ‖² + TND`, which vanishes identically for every scheme.
pub fn energy_balance(
    space: &FeSpace,
    old: &PhaseState,
    new: &PhaseState,
    params: &ModelParams,
    config: &SchemeConfig,
    dt: f64,
) -> EnergyBalance {
    let truncated = config.is_truncated();
    let e_old = energy(space, old, params, truncated);
    let e_new = energy(space, new, params, truncated);
    let de = (e_new - e_old) / dt;
    let phys = physical_dissipation(space, new, params);
    let tnd = numerical_dissipation(space, old, new, params, config, dt).tnd;
    EnergyBalance {
        de_dt: de,
        physical: phys,
        tnd,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBalance {
    pub de_dt: f64,
    pub physical: f64,
    pub tnd: f64,
}

impl EnergyBalance {
    pub fn residual(&self) -> f64 {
        self.de_dt + self.physical + self.tnd
    }

    /// Residual relative to the largest term.
    pub fn relative(&self) -> f64 {
        let scale = self.de_dt.abs().max(self.physical.abs()).max(self.tnd.abs());
        if scale == 0.0 {
            0.0
        } else {
            self.residual().abs() / scale
        }
    }
}

/// `‖Σφᵢ − 1‖` in L² and at the nodes.
pub fn constraint_norms(space: &FeSpace, state: &PhaseState) -> (f64, f64) {
    let n = space.num_nodes();
    let c: Vec<f64> = (0..n)
        .map(|k| state.phi.iter().map(|f| f[k]).sum::<f64>() - 1.0)
        .collect();
    let norms = space.norms(&c);
    (norms.l2, norms.linf)
}

pub fn volumes(space: &FeSpace, state: &PhaseState) -> Vec<f64> {
    state.phi.iter().map(|f| space.integrate(f)).collect()
}

/// One diagnostics row.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub energy_truncated: f64,
    pub kinetic: f64,
    pub volumes: Vec<f64>,
    pub constraint_l2: f64,
    pub constraint_linf: f64,
    pub nd: Vec<f64>,
    pub tnd: f64,
    pub energy_law_residual: f64,
}

impl DiagnosticsRecord {
    /// `previous` carries the state before the step and the step size; the
    /// dissipation columns are zero without it.
    pub fn compute(
        space: &FeSpace,
        params: &ModelParams,
        config: &SchemeConfig,
        previous: Option<(&PhaseState, f64)>,
        state: &PhaseState,
        kinetic: f64,
    ) -> Self {
        let (constraint_l2, constraint_linf) = constraint_norms(space, state);
        let (nd, tnd, residual) = match previous {
            Some((old, dt)) if dt > 0.0 => {
                let d = numerical_dissipation(space, old, state, params, config, dt);
                let r = energy_law_residual(space, old, state, params, config, dt);
                (d.nd, d.tnd, r)
            }
            _ => (vec![0.0; state.num_phases()], 0.0, 0.0),
        };
        DiagnosticsRecord {
            t: state.t,
            energy: energy(space, state, params, false),
            energy_truncated: energy(space, state, params, true),
            kinetic,
            volumes: volumes(space, state),
            constraint_l2,
            constraint_linf,
            nd,
            tnd,
            energy_law_residual: residual,
        }
    }
}

/// One convergence-table row; rates compare with the previous row.
#[derive(Clone, Debug, PartialEq)]
pub struct EocRow {
    pub dt: f64,
    pub e2_phi: f64,
    pub e1_phi: f64,
    pub e2_mu: f64,
    pub e1_mu: f64,
    pub r2_phi: Option<f64>,
    pub r1_phi: Option<f64>,
    pub r2_mu: Option<f64>,
    pub r1_mu: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct EocTable {
    pub rows: Vec<EocRow>,
}

impl EocTable {
    fn mean(rates: impl Iterator<Item = Option<f64>>) -> Option<f64> {
        let v: Vec<f64> = rates.flatten().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn mean_r2_phi(&self) -> Option<f64> {
        Self::mean(self.rows.iter().map(|r| r.r2_phi))
    }

    pub fn mean_r1_phi(&self) -> Option<f64> {
        Self::mean(self.rows.iter().map(|r| r.r1_phi))
    }

    pub fn mean_r2_mu(&self) -> Option<f64> {
        Self::mean(self.rows.iter().map(|r| r.r2_mu))
    }

    pub fn mean_r1_mu(&self) -> Option<f64> {
        Self::mean(self.rows.iter().map(|r| r.r1_mu))
    }
}

/// `log(e/ẽ) / log(Δt/Δt̃)`; `None` when either error vanishes.
pub fn rate(e: f64, dt: f64, e_tilde: f64, dt_tilde: f64) -> Option<f64> {
    (e > 0.0 && e_tilde > 0.0 && dt != dt_tilde).then(|| (e / e_tilde).ln() / (dt / dt_tilde).ln())
}

/// Relative `(L², H¹)` errors of stacked fields against a reference.
fn stacked_errors(space: &FeSpace, reference: &[Vec<f64>], approx: &[Vec<f64>], what: &str) -> Result<(f64, f64)> {
    let m = space.mass();
    let k = space.stiffness();
    let (mut num2, mut num1, mut den2, mut den1) = (0.0, 0.0, 0.0, 0.0);
    for (r, a) in reference.iter().zip(approx) {
        let d: Vec<f64> = r.iter().zip(a).map(|(x, y)| x - y).collect();
        let dm = m.bilinear(&d, &d);
        let rm = m.bilinear(r, r);
        num2 += dm;
        den2 += rm;
        num1 += dm + k.bilinear(&d, &d);
        den1 += rm + k.bilinear(r, r);
    }
    if den2 <= 0.0 || den1 <= 0.0 {
        return Err(Error::UndefinedRate(format!("reference {what} has zero norm")));
    }
    Ok(((num2 / den2).sqrt(), (num1 / den1).max(0.0).sqrt()))
}

/// Convergence table of `runs` (sorted by decreasing step) against `reference`.
pub fn eoc(space: &FeSpace, reference: &PhaseState, runs: &[(f64, PhaseState)]) -> Result<EocTable> {
    let mut rows: Vec<EocRow> = Vec::with_capacity(runs.len());
    for (dt, state) in runs {
        if state.num_phases() != reference.num_phases() {
            return Err(Error::Dimension("run and reference differ in phase count".into()));
        }
        let (e2_phi, e1_phi) = stacked_errors(space, &reference.phi, &state.phi, "phi")?;
        let (e2_mu, e1_mu) = stacked_errors(space, &reference.mu, &state.mu, "mu")?;
        let mut row = EocRow {
            dt: *dt,
            e2_phi,
            e1_phi,
            e2_mu,
            e1_mu,
            r2_phi: None,
            r1_phi: None,
            r2_mu: None,
            r1_mu: None,
        };
        if let Some(prev) = rows.last() {
            row.r2_phi = rate(prev.e2_phi, prev.dt, e2_phi, *dt);
            row.r1_phi = rate(prev.e1_phi, prev.dt, e1_phi, *dt);
            row.r2_mu = rate(prev.e2_mu, prev.dt, e2_mu, *dt);
            row.r1_mu = rate(prev.e1_mu, prev.dt, e1_mu, *dt);
        }
        rows.push(row);
    }
    Ok(EocTable { rows })
}
