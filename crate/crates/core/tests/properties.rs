//! Property tests for the invariants of the potentials, the P1 space and the
//! time steppers.

use std::sync::Arc;

use approx::assert_relative_eq;
use phasefield_core::chemistry::{
    double_well, f123_grad, f123_hessian, penalty, penalty_lower_triangular, product_hessian, product_potential,
    truncated_double_well,
};
use phasefield_core::diagnostics::{energy, energy_balance, energy_law_residual, volumes};
use phasefield_core::mesh_fe::{build_structured_mesh, FeSpace, Rect};
use phasefield_core::schemes::{SchemeContext, SchemeId, TauMode};
use phasefield_core::{ModelParams, PhaseState, SchemeConfig};
use proptest::prelude::*;

fn fd_tol(scale: f64) -> f64 {
    1e-7 * scale.max(1.0)
}

proptest! {
    #[test]
    fn product_gradient_matches_difference_quotient(phi in prop::collection::vec(-1.5f64..1.5, 2..6)) {
        let h = 1e-6;
        let (_, g) = product_potential(&phi);
        for i in 0..phi.len() {
            let (mut a, mut b) = (phi.clone(), phi.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (product_potential(&a).0 - product_potential(&b).0) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() < fd_tol(g[i].abs()), "{fd} vs {}", g[i]);
        }
    }

    #[test]
    fn product_hessian_is_symmetric_and_matches_gradient(phi in prop::collection::vec(-1.5f64..1.5, 2..6)) {
        let n = phi.len();
        let h = 1e-6;
        let hess = product_hessian(&phi);
        for i in 0..n {
            let (mut a, mut b) = (phi.clone(), phi.clone());
            a[i] += h;
            b[i] -= h;
            let (ga, gb) = (product_potential(&a).1, product_potential(&b).1);
            for j in 0..n {
                prop_assert_eq!(hess[i * n + j], hess[j * n + i]);
                let fd = (ga[j] - gb[j]) / (2.0 * h);
                prop_assert!((fd - hess[j * n + i]).abs() < fd_tol(fd.abs()));
            }
        }
    }

    #[test]
    fn ternary_product_agrees_with_general_form(p in prop::array::uniform3(-1.5f64..1.5)) {
        let (v, g) = f123_grad(p[0], p[1], p[2]);
        let (vg, gg) = product_potential(&p);
        prop_assert!((v - vg).abs() <= 1e-15 * vg.abs().max(1.0));
        let hess = f123_hessian(p[0], p[1], p[2]);
        let hg = product_hessian(&p);
        for i in 0..3 {
            prop_assert!((g[i] - gg[i]).abs() <= 1e-14);
            for j in 0..3 {
                prop_assert!((hess[i][j] - hg[i * 3 + j]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn double_well_derivatives_match(phi in -2.0f64..3.0) {
        let h = 1e-6;
        for pot in [double_well as fn(f64) -> (f64, f64, f64), truncated_double_well] {
            let (_, f, fp) = pot(phi);
            let fd = (pot(phi + h).0 - pot(phi - h).0) / (2.0 * h);
            prop_assert!((fd - f).abs() < fd_tol(f.abs()));
            if phi.abs() > 1e-5 && (phi - 1.0).abs() > 1e-5 {
                let fd2 = (pot(phi + h).1 - pot(phi - h).1) / (2.0 * h);
                prop_assert!((fd2 - fp).abs() < fd_tol(fp.abs()));
            }
        }
    }

    #[test]
    fn truncated_well_has_bounded_curvature(phi in -50.0f64..50.0) {
        let (big_f, _, fp) = truncated_double_well(phi);
        prop_assert!(fp.abs() <= 0.5);
        prop_assert!(big_f >= 0.0);
        if (0.0..=1.0).contains(&phi) {
            prop_assert_eq!(truncated_double_well(phi), double_well(phi));
        }
    }

    #[test]
    fn penalty_gradient_is_uniform(phi in prop::collection::vec(-1.0f64..2.0, 2..6), lambda in 1e-6f64..1.0) {
        let p = penalty(&phi, lambda).unwrap();
        let c = phi.iter().sum::<f64>() - 1.0;
        assert_relative_eq!(p.value, c * c / (2.0 * lambda), max_relative = 1e-14);
        assert_relative_eq!(p.grad, c / lambda, max_relative = 1e-14);
        // The lower-triangular split plus its transpose is the full Hessian.
        let n = phi.len();
        let l = penalty_lower_triangular(n, lambda).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert_relative_eq!(l[i * n + j] + l[j * n + i], p.hessian[i * n + j], max_relative = 1e-14);
            }
        }
    }
}

fn space(nx: usize, ny: usize) -> Arc<FeSpace> {
    Arc::new(FeSpace::new(build_structured_mesh(Rect::new(-0.3, 0.5, 0.1, 0.6), nx, ny).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn p1_matrices_are_exact_for_linear_fields(nx in 1usize..7, ny in 1usize..7, a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
        let s = space(nx, ny);
        let area = 0.8 * 0.5;
        let lin = s.mesh().interpolate(|x, y| a * x + b * y + c);
        let ones = vec![1.0; s.num_nodes()];
        assert_relative_eq!(s.mass().bilinear(&ones, &ones), area, max_relative = 1e-13);
        assert_relative_eq!(s.stiffness().bilinear(&lin, &lin), (a * a + b * b) * area, max_relative = 1e-12, epsilon = 1e-13);
        prop_assert!(s.stiffness().matvec(&ones).iter().all(|v| v.abs() < 1e-12));
        // ∫(ax + by + c) over [−0.3, 0.5] × [0.1, 0.6].
        let exact = area * (a * 0.1 + b * 0.35 + c);
        prop_assert!((s.integrate(&lin) - exact).abs() < 1e-12);
    }

    #[test]
    fn weighted_mass_is_symmetric_positive(nx in 1usize..5, ny in 1usize..5, seed in 0u64..1000) {
        let s = space(nx, ny);
        let w: Vec<f64> = (0..s.num_qp()).map(|q| 1.0 + ((q as u64 * 7919 + seed) % 97) as f64 / 97.0).collect();
        let m = s.weighted_mass_qp(&w);
        let n = s.num_nodes();
        for r in 0..n {
            for c in 0..n {
                prop_assert!((m.get(r, c) - m.get(c, r)).abs() < 1e-15);
            }
        }
        let x: Vec<f64> = (0..n).map(|k| ((k as f64) * 1.7 + seed as f64).sin()).collect();
        prop_assert!(m.bilinear(&x, &x) > 0.0);
    }
}

fn random_state(space: &FeSpace, np: usize, seed: u64, spread: f64) -> PhaseState {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = space.num_nodes();
    let mut phi: Vec<Vec<f64>> = (0..np - 1)
        .map(|_| (0..n).map(|_| 1.0 / np as f64 + spread * rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let last = (0..n).map(|k| 1.0 - phi.iter().map(|f| f[k]).sum::<f64>()).collect();
    phi.push(last);
    PhaseState::from_nodal(space, phi).unwrap()
}

fn context(space: Arc<FeSpace>, scheme: SchemeId, np: usize, dt: f64) -> SchemeContext {
    let sigma = [1.0, 0.8, 1.3, 0.9][..np].to_vec();
    let params = ModelParams::new(0.05, 1e-3, 7.0, vec![1e-3; np], sigma).unwrap();
    SchemeContext::new(space, params, SchemeConfig::new(scheme, dt)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_scheme_conserves_volume(seed in 0u64..10_000, dt in 1e-5f64..1e-2, pick in 0usize..5) {
        let (scheme, np) = [
            (SchemeId::Td1, 3),
            (SchemeId::Ntd1, 3),
            (SchemeId::Ntc2, 3),
            (SchemeId::Ntc2, 4),
            (SchemeId::Ncomp, 4),
        ][pick];
        let s = space(6, 5);
        let ctx = context(s.clone(), scheme, np, dt);
        let mut state = random_state(&s, np, seed, 0.3);
        let v0 = volumes(&s, &state);
        for _ in 0..3 {
            state = ctx.step(&state).unwrap();
        }
        for (a, b) in volumes(&s, &state).iter().zip(&v0) {
            prop_assert!((a - b).abs() < 1e-12, "{scheme}: {a} vs {b}");
        }
    }

    #[test]
    fn td1_energy_law_holds_for_any_step(seed in 0u64..10_000, dt in 1e-6f64..1.0) {
        let s = space(6, 5);
        let ctx = context(s.clone(), SchemeId::Td1, 3, dt);
        let state = random_state(&s, 3, seed, 0.6);
        let next = ctx.step(&state).unwrap();
        let e0 = energy(&s, &state, &ctx.params, true);
        let e1 = energy(&s, &next, &ctx.params, true);
        prop_assert!(e1 <= e0 * (1.0 + 1e-12), "{e0} -> {e1}");
        let r = energy_law_residual(&s, &state, &next, &ctx.params, &ctx.config, dt);
        prop_assert!(r <= 1e-9 * e0 / dt, "residual {r}");
    }

    #[test]
    fn energy_balance_closes_for_every_scheme(seed in 0u64..10_000, dt in 1e-5f64..1e-3, pick in 0usize..4) {
        let scheme = [SchemeId::Td1, SchemeId::Ntd1, SchemeId::Ntc2, SchemeId::Ncomp][pick];
        let s = space(6, 5);
        let ctx = context(s.clone(), scheme, 3, dt);
        let state = random_state(&s, 3, seed, 0.2);
        let next = ctx.step(&state).unwrap();
        let b = energy_balance(&s, &state, &next, &ctx.params, &ctx.config, dt);
        prop_assert!(b.relative() < 1e-8, "{scheme}: {b:?}");
    }

    #[test]
    fn pure_phases_are_steady(pick in 0usize..3, scheme_pick in 0usize..4, tau in 0.0f64..5.0) {
        let scheme = [SchemeId::Td1, SchemeId::Ntd1, SchemeId::Ntc2, SchemeId::Ncomp][scheme_pick];
        let s = space(4, 4);
        let n = s.num_nodes();
        let phi: Vec<Vec<f64>> = (0..3).map(|i| vec![if i == pick { 1.0 } else { 0.0 }; n]).collect();
        let state = PhaseState::from_nodal(&s, phi.clone()).unwrap();
        let mut ctx = context(s.clone(), scheme, 3, 1e-3);
        ctx.config.tau = TauMode::Explicit(vec![tau; 3]);
        let next = ctx.step(&state).unwrap();
        for (a, b) in next.phi.iter().flatten().zip(phi.iter().flatten()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
