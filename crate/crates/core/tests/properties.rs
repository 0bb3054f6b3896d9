use num_rational::Ratio;
use ocq_core::lvalue::{solve_hecke_quadratic, stabilize, EigenformData};
use ocq_core::nearly::{hdagger, nabla, nabla_n_closed, u_nearly, v_nearly};
use ocq_core::qexp::{deplete, partial, u_op, v_op};
use ocq_core::spectral::{newton_polygon, riesz_projector, slope_factor, Slope};
use ocq_core::{FamilyElement, Matrix, NearlyExp, PadicPoly, PadicScalar, QExp, Weight};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn prime() -> impl Strategy<Value = u32> {
    prop::sample::select(vec![2u32, 3, 5, 7])
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scalar_field_laws(p in prime(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = 10;
        let a = PadicScalar::random(&mut r, p, n, -3);
        let b = PadicScalar::random(&mut r, p, n, -3);
        let c = PadicScalar::random(&mut r, p, n, 0);
        prop_assert_eq!((a + b) - b, a);
        prop_assert_eq!(a * (b + c), a * b + a * c);
        if !b.is_zero() {
            prop_assert_eq!((a * b).try_div(b).unwrap(), a);
            if !a.is_zero() {
                prop_assert_eq!((a * b).valuation(), a.valuation() + b.valuation());
            }
        }
    }

    #[test]
    fn family_ring_laws(p in prime(), seed in any::<u64>(), m in 1usize..5) {
        let mut r = rng(seed);
        let x = FamilyElement::random(&mut r, p, 10, m, -1);
        let y = FamilyElement::random(&mut r, p, 10, m, 0);
        prop_assert_eq!(&x * &y, &y * &x);
        let u = y.add_int(1);
        if u.constant_term().is_unit() {
            prop_assert_eq!(&u * &u.inv().unwrap(), FamilyElement::one(p, 10, m));
        }
    }

    #[test]
    fn hecke_operators_on_expansions(p in prime(), seed in any::<u64>(), q in 10usize..80) {
        let mut r = rng(seed);
        let f = QExp::random(&mut r, p, 10, 2, q, -1);
        prop_assert_eq!(u_op(&v_op(&f)), f.truncate(q / p as usize));
        let dep = deplete(&f);
        prop_assert!(u_op(&dep).is_zero());
        prop_assert_eq!(deplete(&dep), dep.clone());
        let g = QExp::random(&mut r, p, 10, 2, q, -1);
        prop_assert_eq!(partial(&(&f + &g)), &partial(&f) + &partial(&g));
    }

    #[test]
    fn connection_iterates(seed in any::<u64>(), big_n in 0u32..5, degree in 0usize..3) {
        let mut r = rng(seed);
        let k = Weight::new(0, FamilyElement::random(&mut r, 5, 10, 2, 0));
        let w = NearlyExp::random(&mut r, k, degree, 12, 0);
        let mut it = w.clone();
        for _ in 0..big_n {
            it = nabla(&it);
        }
        prop_assert_eq!(nabla_n_closed(&w, big_n), it);
        prop_assert_eq!(u_nearly(&v_nearly(&w)), w.clone());
    }

    #[test]
    fn projection_kills_derivatives(seed in any::<u64>(), degree in 0usize..4) {
        let mut r = rng(seed);
        let mut coeffs = FamilyElement::random(&mut r, 5, 10, 2, 0).coeffs().to_vec();
        coeffs[0] = PadicScalar::random_unit(&mut r, 5, 10);
        coeffs[1] = PadicScalar::one(5, 10);
        let k = Weight::new(0, FamilyElement::from_coeffs(5, 10, coeffs));
        let w = NearlyExp::random(&mut r, k.clone(), degree, 12, 0);
        let out = hdagger(&nabla(&w), &k, i64::MIN).unwrap();
        prop_assert!(out.form.is_zero());
    }

    #[test]
    fn slope_factor_recovers_roots(p in prime(), seed in any::<u64>(), vals in prop::collection::vec(0i64..4, 1..5)) {
        let mut r = rng(seed);
        let n = 16;
        let roots: Vec<PadicScalar> = vals
            .iter()
            .map(|v| PadicScalar::random_unit(&mut r, p, n) * PadicScalar::p_power(p, n, *v))
            .collect();
        let poly = PadicPoly::from_roots(p, n, &roots);
        let mut expected: Vec<i64> = vals.clone();
        expected.sort();
        let slopes: Vec<i64> = newton_polygon(&poly)
            .iter()
            .flat_map(|(s, l)| match s {
                Slope::Finite(x) => vec![x.to_integer(); *l],
                Slope::Infinite => vec![],
            })
            .collect();
        prop_assert_eq!(&slopes, &expected);
        let h = Ratio::from_integer(expected[expected.len() / 2]);
        let (le, gt) = slope_factor(&poly, h).unwrap();
        prop_assert_eq!(le.degree(), expected.iter().filter(|v| Ratio::from_integer(**v) <= h).count());
        prop_assert_eq!(le.mul(&gt), poly);
    }

    #[test]
    fn riesz_projector_is_idempotent(p in prime(), seed in any::<u64>(), size in 1usize..5) {
        let mut r = rng(seed);
        let n = 14;
        let mut m = Matrix::random(&mut r, p, n, size, size, 0);
        for i in 0..size {
            let d = m.get(i, i) + PadicScalar::p_power(p, n, (i % 2) as i64);
            m.set(i, i, d);
        }
        let e = riesz_projector(&m, Ratio::from_integer(0)).unwrap();
        prop_assert_eq!(e.mul(&e), e.clone());
        prop_assert_eq!(e.mul(&m), m.mul(&e));
    }

    #[test]
    fn eisenstein_stabilizations(p in prime(), k in prop::sample::select(vec![4u32, 6, 8, 10])) {
        let f = EigenformData::eisenstein(p, 12, k);
        let (a, b) = solve_hecke_quadratic(&f).unwrap();
        prop_assert_eq!(a + b, f.a_p);
        prop_assert_eq!(a * b, PadicScalar::p_power(p, 12, k as i64 - 1));
        let pair = stabilize(&f, 12, 40).unwrap();
        prop_assert_eq!(pair.recover().unwrap(), pair.f.clone());
    }

    #[test]
    fn qexp_json_round_trip(p in prime(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = QExp::random(&mut r, p, 10, 2, 12, -2);
        let text = serde_json::to_string(&f.to_json()).unwrap();
        let back = QExp::from_json(p, 10, &serde_json::from_str(&text).unwrap()).unwrap();
        prop_assert_eq!(back, f);
    }
}
