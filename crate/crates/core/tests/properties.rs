use nalgebra::DMatrix;
use proptest::prelude::*;

use stackel_core::framediag::{distinct_eigenvalue_check, partition_values, simultaneous_diagonalize};
use stackel_core::matrix;
use stackel_core::phase_poly::{poisson_bracket, random_coefficient_field, random_momenta_polynomial, PhaseState};
use stackel_core::sampling::{seeded, SampleBox};
use stackel_core::scalarfield::{parse_expression, Backend, Chart};
use stackel_core::stackel::{library, stackel_integrals};
use stackel_core::tensorcalc::{killing_residual, one_one, quadratic_to_poly, QuadraticIntegral};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn bracket_is_antisymmetric(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = seeded(seed);
        let f = random_momenta_polynomial(n, 2, &mut rng);
        let g = random_momenta_polynomial(n, 2, &mut rng);
        let sum = poisson_bracket(&f, &g).unwrap().add(&poisson_bracket(&g, &f).unwrap()).unwrap();
        prop_assert!(sum.is_structurally_zero());
    }

    #[test]
    fn bracket_obeys_leibniz(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = seeded(seed);
        let f = random_momenta_polynomial(n, 2, &mut rng);
        let g = random_momenta_polynomial(n, 2, &mut rng);
        let h = random_momenta_polynomial(n, 1, &mut rng);
        let lhs = poisson_bracket(&f, &g.mul(&h).unwrap()).unwrap();
        let rhs = poisson_bracket(&f, &g).unwrap().mul(&h).unwrap()
            .add(&g.mul(&poisson_bracket(&f, &h).unwrap()).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().is_structurally_zero());
    }

    #[test]
    fn bracket_degree_law(seed in any::<u64>(), n in 1usize..=3, a in 1u32..=2, b in 1u32..=2) {
        let mut rng = seeded(seed);
        let mono = |d: u32, rng: &mut _| {
            let mut idx = vec![0u32; n];
            idx[0] = d;
            stackel_core::phase_poly::MomentaPolynomial::monomial(idx, random_coefficient_field(n, rng))
        };
        let f = mono(a, &mut rng);
        let g = mono(b, &mut rng);
        let br = poisson_bracket(&f, &g).unwrap();
        if !br.is_structurally_zero() {
            prop_assert_eq!(br.homogeneous_degree(), Some(a + b - 1));
        }
    }

    #[test]
    fn backends_agree_on_brackets(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = seeded(seed);
        let f = random_momenta_polynomial(n, 2, &mut rng);
        let g = random_momenta_polynomial(n, 2, &mut rng);
        let exact = poisson_bracket(&f, &g).unwrap();
        let numeric = poisson_bracket(&f.to_numeric(), &g.to_numeric()).unwrap();
        let domain = SampleBox::default();
        let s = PhaseState::new(domain.sample_f64(n, &mut rng), domain.sample_f64(n, &mut rng)).unwrap();
        let (a, b) = (exact.evaluate(&s).unwrap(), numeric.evaluate(&s).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
    }

    #[test]
    fn partial_derivatives_commute(seed in any::<u64>(), i in 0usize..3, j in 0usize..3) {
        let mut rng = seeded(seed);
        let f = random_coefficient_field(3, &mut rng);
        prop_assert_eq!(f.partial(i).partial(j), f.partial(j).partial(i));
    }

    #[test]
    fn expression_strings_round_trip(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let f = random_coefficient_field(3, &mut rng);
        let chart = Chart::standard(3);
        let back = parse_expression(&f.to_expr_string(&chart), &chart, Backend::Exact).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn killing_residual_is_linear(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let sys = stackel_integrals(&library::polar()).unwrap();
        let chart = sys.metric.chart().clone();
        let k1 = QuadraticIntegral::diagonal(chart.clone(), vec![random_coefficient_field(2, &mut rng), random_coefficient_field(2, &mut rng)], "a").unwrap();
        let k2 = QuadraticIntegral::diagonal(chart.clone(), vec![random_coefficient_field(2, &mut rng), random_coefficient_field(2, &mut rng)], "b").unwrap();
        let sum = QuadraticIntegral::diagonal(chart, (0..2).map(|i| k1.components()[i][i].add(&k2.components()[i][i])).collect(), "a+b").unwrap();
        let lhs = killing_residual(&sys.metric, &sum).unwrap();
        let rhs = killing_residual(&sys.metric, &k1).unwrap().add(&killing_residual(&sys.metric, &k2).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().is_structurally_zero());
    }

    #[test]
    fn one_one_is_metric_self_adjoint(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let sys = stackel_integrals(&library::liouville()).unwrap();
        let c = random_coefficient_field(2, &mut rng);
        let chart = sys.metric.chart().clone();
        let k = QuadraticIntegral::new(
            chart,
            vec![vec![random_coefficient_field(2, &mut rng), c.clone()], vec![c, random_coefficient_field(2, &mut rng)]],
            "k",
        ).unwrap();
        // g_lower · K^i_j is the fully lowered tensor, hence symmetric.
        let lowered = matrix::multiply(sys.metric.lower().unwrap(), &one_one(&k, &sys.metric).unwrap());
        prop_assert_eq!(lowered[0][1].clone(), lowered[1][0].clone());
    }

    #[test]
    fn partition_is_idempotent(values in prop::collection::vec(0u8..4, 1..6)) {
        let vals: Vec<f64> = values.iter().map(|&v| f64::from(v) * 0.5).collect();
        let p = partition_values(&vals, 1e-9);
        let first_of_block: Vec<f64> = (0..p.m).map(|b| vals[p.members(b)[0]]).collect();
        let constant: Vec<f64> = p.assignment.iter().map(|&b| first_of_block[b]).collect();
        let q = partition_values(&constant, 1e-9);
        prop_assert_eq!((q.m, q.sizes), (p.m, p.sizes));
    }

    #[test]
    fn distinctness_survives_positive_rescaling(values in prop::collection::vec(-20i32..20, 1..5), c in 0.1f64..10.0) {
        let d: Vec<f64> = values.iter().map(|&v| f64::from(v) * 0.01).collect();
        let k = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.clone()));
        let g = DMatrix::identity(d.len(), d.len());
        let a = distinct_eigenvalue_check(&g, &k, 1e-9).unwrap();
        let b = distinct_eigenvalue_check(&g, &(&k * c), 1e-9).unwrap();
        prop_assert_eq!(a.distinct, b.distinct);
    }

    #[test]
    fn diagonalization_recovers_spectrum(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = seeded(seed);
        let raw = DMatrix::from_fn(n, n, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let q = raw.qr().q();
        let spectrum: Vec<f64> = (0..n).map(|i| i as f64 * 1.5 - 2.0).collect();
        let k = q.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(spectrum.clone())) * &q;
        let k = (&k + k.transpose()) * 0.5;
        let frame = simultaneous_diagonalize(&DMatrix::identity(n, n), &[k], 1e-9).unwrap();
        let mut got = frame.diagonals[0].clone();
        got.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&spectrum) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        prop_assert!(frame.signs.iter().all(|&s| s == 1));
    }
}

#[test]
fn jacobi_identity_holds_exactly() {
    let mut rng = seeded(7);
    for n in 1..=3 {
        for _ in 0..4 {
            let f = random_momenta_polynomial(n, 2, &mut rng);
            let g = random_momenta_polynomial(n, 2, &mut rng);
            let h = random_momenta_polynomial(n, 2, &mut rng);
            let br = |a: &_, b: &_| poisson_bracket(a, b).unwrap();
            let total = br(&f, &br(&g, &h)).add(&br(&g, &br(&h, &f))).unwrap().add(&br(&h, &br(&f, &g))).unwrap();
            assert!(total.is_structurally_zero());
        }
    }
}

#[test]
fn shipped_integrals_are_quadratic_and_commute_with_metric() {
    for (name, s) in library::shipped() {
        let sys = stackel_integrals(&s).unwrap();
        for k in &sys.integrals {
            assert_eq!(quadratic_to_poly(k).homogeneous_degree(), Some(2), "{name}");
            assert!(killing_residual(&sys.metric, k).unwrap().is_structurally_zero(), "{name}");
        }
    }
}
