use num_rational::Ratio;
use ocq_core::lvalue::{
    holomorphic_product, interpolation_bracket, solve_hecke_quadratic, stabilize, triple_bracket,
    EigenformData, EulerFactors, FixtureBasis, SpanModel, TripleConfig,
};
use ocq_core::qexp::deplete;
use ocq_core::spectral::eigen_projector;
use ocq_core::{Error, PadicScalar};

const P: u32 = 2;
const N: u32 = 62;
const Q: usize = 120;

/// Slope bound `k - 1` keeps both stabilizations of `E_k`.
fn cfg(k: u32, t: u32, deplete: bool) -> TripleConfig {
    TripleConfig {
        t,
        slope: Ratio::from_integer(k as i64 - 1),
        floor: 0,
        deplete,
    }
}

fn eis(k: u32) -> EigenformData {
    EigenformData::eisenstein(P, N, k)
}

fn model(f: &EigenformData) -> SpanModel {
    SpanModel::new(FixtureBasis::level_four(f, N, Q).unwrap()).unwrap()
}

#[test]
fn depleted_pipeline_equals_bracket_times_full_pipeline() {
    // H(∇E4 × E6) is cuspidal, so the t = 1 case pairs against Δ.
    let cases = [
        (eis(8), 4u32, 4u32, 0u32),
        (eis(10), 4, 6, 0),
        (EigenformData::delta(P, N), 4, 6, 1),
    ];
    for (f, y, z, t) in cases {
        let k = f.weight;
        let (g, h) = (eis(y), eis(z));
        let m = model(&f);
        let dep = triple_bracket(&f, &g, &h, &m, &cfg(k, t, true)).unwrap();
        let full = triple_bracket(&f, &g, &h, &m, &cfg(k, t, false)).unwrap();
        let bracket =
            interpolation_bracket(&EulerFactors::at_point(&f, &g, &h, t).unwrap()).unwrap();
        let rhs = bracket * full.value;
        assert!(
            !full.value.is_zero(),
            "k={k}: comparison pipeline vanished: {} {:?}",
            full.value,
            full.stage_log
        );
        assert!(
            rhs.abs_prec() - rhs.valuation() >= 8,
            "k={k}: only {rhs} known"
        );
        assert_eq!(dep.value, rhs, "k={k} t={t}");
        assert_eq!(dep.stage_log.len(), 5);
    }
}

#[test]
fn depletion_factor_relation_on_span_model() {
    // H(∇^t g^[p] × h) = (1 - p^t α_y α_z U^{-1}) H(∇^t g_α × h_α) after the slope projection.
    let (y, z, t) = (4u32, 6u32, 1u32);
    let (f, g, h) = (EigenformData::delta(P, N), eis(y), eis(z));
    let m = model(&f);
    let g_form = g.qexp(P, N, Q).unwrap();
    let h_form = h.qexp(P, N, Q).unwrap();
    let (lhs, _) = holomorphic_product(&deplete(&g_form), y, &h_form, z, t, 0).unwrap();
    let gs = stabilize(&g, N, Q).unwrap();
    let hs = stabilize(&h, N, Q).unwrap();
    let (stab, _) = holomorphic_product(&gs.f_alpha, y, &hs.f_alpha, z, t, 0).unwrap();
    let (alpha, beta) = solve_hecke_quadratic(&f).unwrap();
    let e = eigen_projector(&m.u, &[alpha, beta]).unwrap();
    let lhs = e.mul_vec(&m.coordinates(&lhs).unwrap());
    let v = e.mul_vec(&m.coordinates(&stab).unwrap());
    let w = m.u_inverse_on(&e, &v).unwrap();
    let c = PadicScalar::p_power(P, N, t as i64) * gs.alpha * hs.alpha;
    let mut checked = 0;
    for (i, (l, (a, b))) in lhs.iter().zip(v.iter().zip(&w)).enumerate() {
        let r = *a - c * *b;
        assert_eq!(*l, r, "coordinate {i}");
        if !r.is_zero() {
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn product_outside_fixture_span_fails_at_coordinates() {
    let (f, g) = (eis(8), eis(4));
    let level_one = SpanModel::new(FixtureBasis::old_space(&f, N, Q, 1).unwrap()).unwrap();
    let err = triple_bracket(&f, &g, &g, &level_one, &cfg(8, 0, true)).unwrap_err();
    match err {
        Error::Stage { stage, source } => {
            assert_eq!(stage, "coordinates");
            assert!(matches!(*source, Error::OutsideSpan));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn weight_mismatch_is_rejected() {
    let (f, g) = (eis(10), eis(4));
    let m = model(&f);
    assert!(matches!(
        triple_bracket(&f, &g, &g, &m, &cfg(10, 0, true)),
        Err(Error::WeightMismatch(_))
    ));
}
