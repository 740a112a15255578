use fvp_core::fvp::random_instance;
use fvp_core::linalg::{real_matrix, real_vector};
use fvp_core::{
    compatibility_check, domain_membership, duhamel_path, evolve, inverse_evolve, parse_problem, x_norm,
    CMatrix, CoefficientRule, Coefficients, CompatibilityOptions, Complex64, DomainSettings,
    FinalValueProblem, LaxMilgramOperator, Operator, SourceTerm, SpectralModel, TimeGrid, Verdict,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn complex_vec(len: usize) -> impl Strategy<Value = Coefficients> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), len)
        .prop_map(|v| Coefficients::from_iterator(v.len(), v.into_iter().map(|(re, im)| Complex64::new(re, im))))
}

fn spectral(max_lambda: f64) -> impl Strategy<Value = (Operator, Coefficients)> {
    prop::collection::vec(0.1f64..max_lambda, 1..8).prop_flat_map(|mut ev| {
        ev.sort_by(f64::total_cmp);
        let n = ev.len();
        let op: Operator = SpectralModel::new(ev, "prop").unwrap().into();
        (Just(op), complex_vec(n))
    })
}

/// `2I + small perturbation`, elliptic for every draw.
fn matrix_operator() -> impl Strategy<Value = (Operator, Coefficients)> {
    prop::collection::vec(-0.5f64..0.5, 9).prop_flat_map(|p| {
        let mut form = real_matrix(3, 3, &p);
        for i in 0..3 {
            form[(i, i)] += Complex64::new(2.0, 0.0);
        }
        let op: Operator = LaxMilgramOperator::build(CMatrix::identity(3, 3), CMatrix::identity(3, 3), form)
            .unwrap()
            .into();
        (Just(op), complex_vec(3))
    })
}

fn close(a: &Coefficients, b: &Coefficients, rel: f64) -> bool {
    (a - b).norm() <= rel * a.norm().max(b.norm()).max(1e-300)
}

fn rank(v: Verdict) -> u8 {
    match v {
        Verdict::NotInDomain => 0,
        Verdict::Borderline => 1,
        Verdict::InDomain => 2,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semigroup_law_spectral((op, x) in spectral(50.0), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let joint = evolve(&op, s + t, &x).unwrap();
        let split = evolve(&op, s, &evolve(&op, t, &x).unwrap()).unwrap();
        prop_assert!(close(&joint, &split, 1e-12));
    }

    #[test]
    fn semigroup_law_matrix((op, x) in matrix_operator(), s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let joint = evolve(&op, s + t, &x).unwrap();
        let split = evolve(&op, s, &evolve(&op, t, &x).unwrap()).unwrap();
        prop_assert!(close(&joint, &split, 1e-11));
    }

    #[test]
    fn inverse_law_spectral((op, x) in spectral(20.0), t in 0.0f64..1.0) {
        let back = inverse_evolve(&op, t, &evolve(&op, t, &x).unwrap()).unwrap();
        for (a, b) in back.iter().zip(x.iter()) {
            prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300));
        }
    }

    #[test]
    fn inverse_law_matrix((op, x) in matrix_operator(), t in 0.0f64..1.0) {
        let back = inverse_evolve(&op, t, &evolve(&op, t, &x).unwrap()).unwrap();
        prop_assert!(close(&back, &x, 1e-9));
    }

    #[test]
    fn contraction_by_numerical_range((op, x) in matrix_operator(), t in 0.0f64..3.0) {
        let m = op.lower_bound();
        let h = op.h_norm(&evolve(&op, t, &x).unwrap());
        prop_assert!(h <= (-m * t).exp() * op.h_norm(&x) * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn duhamel_is_affine((op, u0) in spectral(30.0), seed in any::<u64>()) {
        let grid = TimeGrid::uniform(0.7, 24).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, f1) = random_instance(&op, &grid, &mut rng);
        let (_, f2) = random_instance(&op, &grid, &mut rng);
        let sum = SourceTerm::new(
            f1.samples.iter().zip(&f2.samples).map(|(a, b)| a + b).collect(),
            f1.interpolation,
        );
        let lhs = duhamel_path(&op, &u0, &sum, &grid).unwrap();
        let a = duhamel_path(&op, &u0, &f1, &grid).unwrap();
        let b = duhamel_path(&op, &Coefficients::zeros(u0.len()), &f2, &grid).unwrap();
        for ((l, x), y) in lhs.states.iter().zip(&a.states).zip(&b.states) {
            prop_assert!((l - (x + y)).norm() <= 1e-12 * (1.0 + l.norm()));
        }
    }

    #[test]
    fn x_norm_is_homogeneous((op, u0) in spectral(30.0), c in -5.0f64..5.0) {
        let grid = TimeGrid::uniform(1.0, 16).unwrap();
        let path = duhamel_path(&op, &u0, &SourceTerm::zero(u0.len(), &grid), &grid).unwrap();
        let x = x_norm(&op, &path).unwrap();
        let scaled = x_norm(&op, &path.scaled(c)).unwrap();
        prop_assert!((scaled - c.abs() * x).abs() <= 1e-12 * (1.0 + scaled));
    }

    #[test]
    fn forward_data_are_compatible((op, _) in spectral(100.0), seed in any::<u64>(), t in 0.05f64..1.0) {
        let grid = TimeGrid::uniform(t, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u0, f) = random_instance(&op, &grid, &mut rng);
        let u_final = duhamel_path(&op, &u0, &f, &grid).unwrap().final_state().clone();
        let problem = FinalValueProblem::new(op, f, u_final, grid).unwrap();
        let report = compatibility_check(&problem, &CompatibilityOptions::default()).unwrap();
        prop_assert_eq!(report.verdict(), Verdict::InDomain);
    }

    #[test]
    fn verdicts_rise_with_decay(b1 in 0.01f64..2.0, b2 in 0.01f64..2.0) {
        let model = SpectralModel::power_law(64, 1.0, 2.0).unwrap();
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let s = DomainSettings::default();
        let levels = [16, 32, 64];
        let v_lo = domain_membership(&model, 1.0, &CoefficientRule::ExpDecay { beta: lo }, &levels, &s).unwrap();
        let v_hi = domain_membership(&model, 1.0, &CoefficientRule::ExpDecay { beta: hi }, &levels, &s).unwrap();
        prop_assert!(rank(v_lo.verdict) <= rank(v_hi.verdict));
    }

    #[test]
    fn verdicts_fall_with_time(t1 in 0.01f64..2.0, t2 in 0.01f64..2.0) {
        let model = SpectralModel::power_law(64, 1.0, 2.0).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let s = DomainSettings::default();
        let rule = CoefficientRule::ExpDecay { beta: 1.0 };
        let levels = [16, 32, 64];
        let v_lo = domain_membership(&model, lo, &rule, &levels, &s).unwrap();
        let v_hi = domain_membership(&model, hi, &rule, &levels, &s).unwrap();
        prop_assert!(rank(v_lo.verdict) >= rank(v_hi.verdict));
    }

    #[test]
    fn parser_never_panics(text in "\\PC*") {
        let _ = parse_problem(&text);
    }

    #[test]
    fn parser_survives_structured_noise(
        m in 0u64..40, n in 0usize..6, t in -1.0f64..3.0, q in -1.0f64..4.0, lengths in prop::collection::vec(-1.0f64..4.0, 0..3),
    ) {
        let eig: Vec<String> = (1..=n).map(|j| format!("{}", (j * j) as f64 * t)).collect();
        let text = format!(
            r#"{{"operator": {{"kind": "spectral", "eigenvalues": [{}]}}, "T": {t}, "grid": {{"M": {m}, "grading": {q}}},
                "f": {{"kind": "constant", "value": [{}]}}, "u_T": [{}]}}"#,
            eig.join(","), vec!["1"; n].join(","), vec!["0.5"; n].join(","),
        );
        let _ = parse_problem(&text);
        let dom = format!(
            r#"{{"domain": {{"kind": "rectangle", "lengths": {lengths:?}, "truncation": {m}}}, "T": {t}, "grid": {{"M": {m}}},
                "g": {{"components": [[1], [0.5, 0.1], [], [2]]}}, "u_T": "boundary_lift"}}"#,
        );
        if let Ok(spec) = parse_problem(&dom) {
            let _ = spec.final_state();
        }
    }
}

#[test]
fn power_law_spike_graph_norm() {
    let op: Operator = SpectralModel::power_law(8, 1.0, 2.0).unwrap().into();
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let mut spike = real_vector(&[0.0; 8]);
    spike[5] = Complex64::new(1.0, 0.0);
    let problem = FinalValueProblem::new(op, SourceTerm::zero(8, &grid), spike, grid).unwrap();
    let r = compatibility_check(&problem, &CompatibilityOptions::default()).unwrap();
    assert_eq!(r.verdict(), Verdict::NotInDomain);
    assert!((r.amplified_norm.log - 36.0).abs() < 1e-12);
}
