mod common;

use proptest::prelude::*;

use common::{CaseParams, OperatorParams};
use wavecheck::harness::eoc;
use wavecheck::operator::{SpdOperator, StatePair};
use wavecheck::reconstruct::reconstruct;
use wavecheck::residual::{eta1, initial_reconstruction_error, residual_functions, residuals};
use wavecheck::scheme::{run, Formulation, SchemeFamily, ZeroSource};

fn operator_params() -> impl Strategy<Value = OperatorParams> {
    prop_oneof![
        (0.3..3.0_f64, prop::collection::hash_set((1..=5_u32, 1..=5_u32), 1..=4)).prop_map(|(c, modes)| {
            let mut modes: Vec<_> = modes.into_iter().collect();
            modes.sort_unstable();
            OperatorParams::Spectral { c, modes }
        }),
        (2..=15_usize).prop_map(|n| OperatorParams::Fd1d { n }),
        (2..=6_usize).prop_map(|n| OperatorParams::Fd2d { n }),
    ]
}

fn q1() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.25), Just(0.5), 0.25..1.5_f64]
}

/// Stable formulation together with its Courant number `k sqrt(lambda_max)`.
fn stable_formulation() -> impl Strategy<Value = (Formulation, f64)> {
    prop_oneof![
        (0.05..1.9_f64).prop_map(|c| (Formulation::LeapFrog, c)),
        (q1(), 0.05..3.0_f64).prop_map(|(q1, c)| (Formulation::Cosine1 { q1 }, c)),
        (q1(), 0.05..3.0_f64).prop_map(|(q1, c)| (Formulation::Cosine2 { q1 }, c)),
    ]
}

prop_compose! {
    fn stable_case()(
        operator in operator_params(),
        (formulation, courant) in stable_formulation(),
        n_steps in 2..=40_usize,
        seed in any::<u64>(),
        forcing in prop_oneof![Just(0.0), -2.0..2.0_f64],
    ) -> CaseParams {
        CaseParams { operator, formulation, courant, n_steps, seed, forcing }
    }
}

fn vector(op: &SpdOperator, coeffs: &[f64]) -> wavecheck::operator::StateVector {
    op.vector(coeffs.iter().cycle().take(op.dim()).copied().collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn structural_identities_hold_on_stable_runs(params in stable_case()) {
        let case = common::build(&params).unwrap();
        let d = common::defects(&case).unwrap();
        prop_assert!(d.ghost <= 1e-12, "ghost {:?}", d);
        prop_assert!(d.midpoint <= 1e-12, "mid-point {:?}", d);
        prop_assert!(d.continuity <= 1e-12, "continuity {:?}", d);
        prop_assert!(d.energy.unwrap_or(0.0) <= 1e-12, "energy {:?}", d);
    }

    #[test]
    fn operator_is_symmetric_positive(
        params in operator_params(),
        a in prop::collection::vec(-1.0..1.0_f64, 1..8),
        b in prop::collection::vec(-1.0..1.0_f64, 1..8),
    ) {
        let op = params.build();
        let (v, w) = (vector(&op, &a), vector(&op, &b));
        let vaw = op.inner(&v, &op.apply(&w).unwrap()).unwrap();
        let avw = op.inner(&op.apply(&v).unwrap(), &w).unwrap();
        let scale = op.spectral_bound() * op.l2_norm(&v).unwrap() * op.l2_norm(&w).unwrap();
        prop_assert!((vaw - avw).abs() <= 1e-12 * scale.max(1e-300));
        let vav = op.inner(&v, &op.apply(&v).unwrap()).unwrap();
        let vv = op.inner(&v, &v).unwrap();
        prop_assert!(vav >= op.spectral_min() * vv * (1.0 - 1e-12));
        prop_assert!(vav <= op.spectral_bound() * vv * (1.0 + 1e-12));
    }

    #[test]
    fn shifted_solve_inverts(
        params in operator_params(),
        alpha in 0.0..2.0_f64,
        b in prop::collection::vec(-1.0..1.0_f64, 1..8),
    ) {
        let op = params.build();
        let b = vector(&op, &b);
        let x = op.solve_shifted(alpha, &b).unwrap();
        let mut back = op.apply(&x).unwrap().scaled(alpha);
        back += &x;
        prop_assert!((&back - &b).max_abs() <= 1e-12 * (1.0 + alpha * op.spectral_bound()) * b.max_abs().max(1.0));
    }

    #[test]
    fn cosine_approximates_the_cosine(q1 in 0.0..1.5_f64, x in 0.0..0.3_f64) {
        let r = SchemeFamily::Cosine { q1 }.cosine_approximation(x);
        // second-order agreement with cos(x)
        prop_assert!((r - x.cos()).abs() <= (1.0 + q1) * x.powi(4));
    }

    #[test]
    fn zero_q1_cosine_reproduces_leapfrog(
        params in operator_params(),
        courant in 0.05..1.9_f64,
        n_steps in 2..30_usize,
        a in prop::collection::vec(-1.0..1.0_f64, 1..8),
        b in prop::collection::vec(-1.0..1.0_f64, 1..8),
    ) {
        let op = params.build();
        let (u0, v0) = (vector(&op, &a), vector(&op, &b));
        let k = courant / op.spectral_bound().sqrt();
        let lf = run(&op, Formulation::LeapFrog, &u0, &v0, &ZeroSource, k, n_steps).unwrap();
        for formulation in [Formulation::Cosine1 { q1: 0.0 }, Formulation::Cosine2 { q1: 0.0 }] {
            let cos = run(&op, formulation, &u0, &v0, &ZeroSource, k, n_steps).unwrap();
            for (x, y) in lf.displacements().iter().zip(cos.displacements()) {
                prop_assert!((x - y).max_abs() <= 1e-13 * lf.max_abs().max(1.0));
            }
        }
    }

    #[test]
    fn estimator_is_homogeneous_in_the_data(
        params in stable_case(),
        scale in prop_oneof![-10.0..-0.1_f64, 0.1..10.0_f64],
    ) {
        let params = CaseParams { forcing: 0.0, ..params };
        let op = params.operator.build();
        let k = params.courant / op.spectral_bound().sqrt();
        let u0 = vector(&op, &[0.7, -0.2, 0.4]);
        let v0 = vector(&op, &[-0.1, 0.5]);
        let estimate = |u0: &wavecheck::operator::StateVector, v0: &wavecheck::operator::StateVector| {
            let traj = run(&op, params.formulation, u0, v0, &ZeroSource, k, params.n_steps).unwrap();
            let rho = residuals(&op, &traj).unwrap();
            let recon = reconstruct(&op, &traj, &rho).unwrap();
            let res = residual_functions(&op, &traj, &recon, &rho).unwrap();
            let e0 = initial_reconstruction_error(u0, v0, &recon).unwrap();
            eta1(&op, &res, &ZeroSource, &e0, traj.final_time(), 3).unwrap().eta1
        };
        let base = estimate(&u0, &v0);
        let scaled = estimate(&u0.scaled(scale), &v0.scaled(scale));
        prop_assert!((scaled - scale.abs() * base).abs() <= 1e-9 * scale.abs() * base.max(1e-300));
    }

    #[test]
    fn energy_norm_is_a_norm(
        params in operator_params(),
        a in prop::collection::vec(-1.0..1.0_f64, 1..8),
        b in prop::collection::vec(-1.0..1.0_f64, 1..8),
        s in -5.0..5.0_f64,
    ) {
        let op = params.build();
        let p = StatePair::new(vector(&op, &a), vector(&op, &b)).unwrap();
        let q = StatePair::new(vector(&op, &b), vector(&op, &a)).unwrap();
        let n = |x: &StatePair| op.energy_norm(x).unwrap();
        prop_assert!((n(&p.scaled(s)) - s.abs() * n(&p)).abs() <= 1e-12 * n(&p).max(1e-300) * s.abs().max(1.0));
        let sum = StatePair::new(&p.phi1 + &q.phi1, &p.phi2 + &q.phi2).unwrap();
        prop_assert!(n(&sum) <= (n(&p) + n(&q)) * (1.0 + 1e-12));
    }

    #[test]
    fn eoc_recovers_power_laws(
        c in 0.01..100.0_f64,
        p in 0.5..4.0_f64,
        h0 in 0.01..1.0_f64,
        ratio in 1.2..4.0_f64,
    ) {
        let h = [h0, h0 / ratio];
        let a = [c * h[0].powf(p), c * h[1].powf(p)];
        prop_assert!((eoc(&a, &h, 0).unwrap() - p).abs() <= 1e-9);
    }
}
