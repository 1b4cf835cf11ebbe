use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use xcpot_core::*;

fn grid(n: usize, kind: GridKind) -> Arc<RadialGrid> {
    RadialGrid::build(n, 20.0, kind).unwrap().shared()
}

fn orbitals() -> impl Strategy<Value = OrbitalSet> {
    (40usize..120, 1usize..=4, any::<u64>(), prop_oneof![Just(GridKind::Log), Just(GridKind::Uniform)])
        .prop_map(|(n, k, seed, kind)| OrbitalSet::random(grid(n, kind), k, seed).unwrap())
}

fn smooth(g: &RadialGrid, c: [f64; 3]) -> Vec<f64> {
    g.sample(|r| c[0] * (-r / 2.0).exp() + c[1] * (0.7 * r).sin() / (1.0 + r) + c[2])
}

fn coeffs() -> impl Strategy<Value = [f64; 3]> {
    [-2.0..2.0f64, -2.0..2.0f64, -3.0..3.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn orbital_sets_are_orthonormal_with_positive_density(phi in orbitals()) {
        prop_assert!(phi.orthonormality_error() < 1e-8);
        prop_assert!(phi.density().iter().all(|&p| p >= 0.0));
        let total = phi.grid().integrate(phi.density()).unwrap();
        prop_assert!((total - phi.len() as f64).abs() < 1e-8);
    }

    #[test]
    fn coulomb_is_linear_and_obeys_gauss(phi in orbitals(), a in -3.0..3.0f64) {
        let g = phi.grid();
        let f = phi.density();
        let h: Vec<f64> = phi.orbital(0).iter().map(|x| x * x).collect();
        let comb: Vec<f64> = f.iter().zip(&h).map(|(x, y)| x + a * y).collect();
        let (vf, vh, vc) = (coulomb_potential(g, f).unwrap(), coulomb_potential(g, &h).unwrap(), coulomb_potential(g, &comb).unwrap());
        for q in 0..vf.len() {
            prop_assert!((vc[q] - vf[q] - a * vh[q]).abs() < 1e-10 * (1.0 + vc[q].abs()));
        }
        let last = g.len() - 1;
        let total = g.integrate(f).unwrap();
        prop_assert!((vf[last] * g.points()[last] - total).abs() < 1e-10);
    }

    #[test]
    fn exchange_is_symmetric_and_nonpositive(phi in orbitals(), c in coeffs(), d in coeffs()) {
        let g = phi.grid();
        let (u, v) = (smooth(g, c), smooth(g, d));
        let (ku, kv) = (exchange_apply(&phi, &u).unwrap(), exchange_apply(&phi, &v).unwrap());
        let scale = (g.inner(&u, &u) * g.inner(&v, &v)).sqrt();
        prop_assert!((g.inner(&v, &ku) - g.inner(&kv, &u)).abs() <= 1e-12 * (1.0 + scale));
        prop_assert!(g.inner(&u, &ku) <= 1e-14 * (1.0 + g.inner(&u, &u)));
        let k = exchange_matrix(&phi);
        let m = k.matrix();
        prop_assert!((m - m.transpose()).amax() < 1e-12);
    }

    #[test]
    fn slater_bounds_hold_pointwise(phi in orbitals(), eta in prop_oneof![Just(0.0), 1e-3..1.0f64]) {
        let vs = slater_potential(&phi, eta).unwrap();
        let vh = coulomb_potential(phi.grid(), phi.density()).unwrap();
        for (q, &v) in vs.values().iter().enumerate() {
            prop_assert!(v <= 0.0);
            prop_assert!(v >= -vh[q] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn structured_systems_have_the_expected_kernel(phi in orbitals().prop_filter("need two orbitals", |p| p.len() >= 2)) {
        let k = exchange_matrix(&phi);
        let n = phi.len();
        let (_, kli) = kli_potential(&phi, &k, Gauge::Raw).unwrap();
        let ones = DVector::from_element(n, 1.0);
        prop_assert!(((DMatrix::identity(n, n) - &kli.s) * ones).norm() < 1e-10);
        prop_assert!(kli.residual < 1e-10 * (1.0 + kli.beta.norm()));
        let (v, elp) = elp_potential(&phi, &k, Gauge::Trace).unwrap();
        prop_assert!(elp.apply_system(&DMatrix::identity(n, n)).norm() < 1e-10);
        prop_assert!(elp.g.trace().abs() < 1e-10);
        prop_assert!(elp.residual < 1e-10 * (1.0 + elp.g.norm()));
        for i in 0..n {
            for j in 0..n {
                let vu: Vec<f64> = v.values().iter().zip(phi.orbital(j)).map(|(a, b)| a * b).collect();
                prop_assert!((phi.grid().inner(phi.orbital(i), &vu) - elp.m[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn gauge_shifts_are_exact(phi in orbitals().prop_filter("need two orbitals", |p| p.len() >= 2)) {
        let k = exchange_matrix(&phi);
        let (raw, raw_sol) = kli_potential(&phi, &k, Gauge::Raw).unwrap();
        let (homo, homo_sol) = kli_potential(&phi, &k, Gauge::Homo).unwrap();
        let lambda = homo_sol.lambda;
        prop_assert!((&homo_sol.alpha - raw_sol.alpha.add_scalar(lambda)).amax() < 1e-12);
        let mask = phi.support_mask();
        for q in 0..mask.len() {
            if mask[q] {
                prop_assert!((homo.values()[q] - raw.values()[q] - lambda).abs() < 1e-9 * (1.0 + lambda.abs()));
            } else {
                prop_assert_eq!(homo.values()[q], 0.0);
            }
        }
    }

    #[test]
    fn kli_and_elp_objectives_ignore_constants(phi in orbitals(), c in coeffs(), shift in -10.0..10.0f64) {
        let v = smooth(phi.grid(), c);
        let w: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let (a, b) = (objective_kli(&phi, &v).unwrap(), objective_kli(&phi, &w).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-12) + 1e-13);
        let (a, b) = (objective_elp(&phi, &v).unwrap(), objective_elp(&phi, &w).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-12) + 1e-13);
        let s = objective_slater(&phi, &v).unwrap();
        prop_assert!(s.i_s >= 0.0 && s.j_s >= 0.0 && a >= -1e-13);
    }

    #[test]
    fn energy_is_rotation_invariant(phi in orbitals(), angle in 0.0..std::f64::consts::TAU) {
        let n = phi.len();
        let mut rot = vec![vec![0.0; n]; n];
        for (i, row) in rot.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        if n >= 2 {
            let (s, c) = angle.sin_cos();
            rot[0][0] = c;
            rot[0][1] = -s;
            rot[1][0] = s;
            rot[1][1] = c;
        }
        let turned = phi.rotate(&rot).unwrap();
        let (a, b) = (hf_energy(&phi, 4.0), hf_energy(&turned, 4.0));
        prop_assert!((a.total - b.total).abs() < 1e-10 * (1.0 + a.total.abs()));
        for (p, q) in phi.density().iter().zip(turned.density()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
        prop_assert!(a.hartree + a.exchange >= -1e-10);
        prop_assert!(bound_checks(&phi).satisfied());
    }

    #[test]
    fn eigenpairs_are_ordered_and_orthonormal(n in 60usize..200, c in coeffs(), z in 0.5..4.0f64, k in 1usize..5) {
        let g = grid(n, GridKind::Log);
        let bg = smooth(&g, c);
        let w: Vec<f64> = g.points().iter().zip(&bg).map(|(r, b)| -z / r + 0.2 * b).collect();
        let spec = lowest_eigenpairs(g.clone(), &w, k).unwrap();
        let e = spec.eigenvalues();
        prop_assert!(e.windows(2).all(|p| p[0] <= p[1]));
        prop_assert!(spec.orbitals.orthonormality_error() < 1e-8);
        let all = RadialHamiltonian::new(g.clone(), &w).unwrap().eigenvalues(k).unwrap();
        for (a, b) in e.iter().zip(&all) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn oep_residual_integrates_to_zero(n in 50usize..120, c in coeffs(), k in 1usize..4) {
        let g = grid(n, GridKind::Log);
        let bg = smooth(&g, c);
        let w: Vec<f64> = g.points().iter().zip(&bg).map(|(r, b)| -3.0 / r + 0.3 * b).collect();
        let spec = lowest_eigenpairs(g.clone(), &w, k).unwrap();
        prop_assume!(spec.gap().is_none_or(|x| x > 1e-6));
        let phi = spec.orbitals;
        let ex = exchange_matrix(&phi);
        let v_x = slater_potential(&phi, 0.0).unwrap();
        let w = LocalPotential::new(g, w, Gauge::None).unwrap();
        let res = oep_residual(&phi, &w, &v_x, &ex).unwrap();
        prop_assert!(res.integral.abs() <= 1e-8 * res.l2_norm.max(1e-300));
    }

    #[test]
    fn mixing_is_affine(a in prop::collection::vec(-5.0..5.0f64, 1..20), theta in 0.0..=1.0f64) {
        let b: Vec<f64> = a.iter().map(|x| 2.0 * x - 1.0).collect();
        let m = mix(&a, &b, theta).unwrap();
        for q in 0..a.len() {
            prop_assert!((m[q] - (a[q] + theta * (b[q] - a[q]))).abs() < 1e-12);
        }
        prop_assert_eq!(mix(&a, &a, theta).unwrap(), a.clone());
    }
}
