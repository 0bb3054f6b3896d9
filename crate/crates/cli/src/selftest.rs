use std::thread;

use anyhow::Result;
use num_rational::Ratio;
use ocq_core::lvalue::{
    bracket_by_stabilizations, interpolation_bracket, solve_hecke_quadratic, stabilize,
    symbolic_bracket_identity, EigenformData, EulerFactors,
};
use ocq_core::nearly::{hdagger, nabla, nabla_n_closed, u_nearly, v_nearly};
use ocq_core::qexp::{deplete, eisenstein_classical, partial_s, theta_eisenstein, u_op, v_op};
use ocq_core::spectral::{
    check_fredholm_factorization, newton_polygon, riesz_projector, slope_factor,
    synthetic_filtered_u, Slope,
};
use ocq_core::{FamilyElement, Matrix, NearlyExp, PadicPoly, PadicScalar, QExp, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::context::Context;

/// Scaled-down parameters shared by every check.
#[derive(Clone, Copy)]
struct Params {
    p: u32,
    n: u32,
    m: usize,
    q: usize,
}

type Check = fn(Params, &mut ChaCha8Rng) -> Result<Vec<String>>;

const CHECKS: &[(&str, Check)] = &[
    ("scalar_field_laws", scalar_field_laws),
    ("family_inverse", family_inverse),
    ("hecke_operators", hecke_operators),
    ("connection_closed_form", connection_closed_form),
    ("projection_kills_derivatives", projection_kills_derivatives),
    ("theta_of_depleted_eisenstein", theta_of_depleted_eisenstein),
    ("newton_polygon_and_factorization", newton_and_factor),
    ("riesz_projector", riesz),
    ("fredholm_factorization", fredholm),
    ("stabilizations", stabilizations),
    ("bracket_two_ways", bracket_two_ways),
    ("symbolic_bracket_identity", symbolic),
    ("json_round_trip", json_round_trip),
];

const ROUNDS: usize = 8;

#[derive(Serialize)]
struct Outcome {
    name: &'static str,
    pass: bool,
    failures: Vec<String>,
}

fn note(fails: &mut Vec<String>, ok: bool, what: impl FnOnce() -> String) {
    if !ok {
        fails.push(what());
    }
}

fn scalar_field_laws(pr: Params, r: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let mut fails = Vec::new();
    for _ in 0..ROUNDS {
        let a = PadicScalar::random(r, pr.p, pr.n, -2);
        let b = PadicScalar::random(r, pr.p, pr.n, -2);
        let c = PadicScalar::random(r, pr.p, pr.n, 0);
        note(&mut fails, (a + b) - b == a, || {
            format!("(a + b) - b != a for a = {a}")
        });
        note(&mut fails, a * (b + c) == a * b + a * c, || {
            format!("distributivity at {a}, {b}, {c}")
        });
        if !b.is_zero() {
            note(&mut fails, (a * b).try_div(b)? == a, || {
                format!("(ab)/b != a for a = {a}, b = {b}")
            });
        }
    }
    Ok(fails)
}

fn family_inverse(pr: Params, r: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let mut fails = Vec::new();
    for _ in 0..ROUNDS {
        let mut coeffs = FamilyElement::random(r, pr.p, pr.n, pr.m, 0)
            .coeffs()
            .to_vec();
        coeffs[0] = PadicScalar::random_unit(r, pr.p, pr.n);
        let x = FamilyElement::from_coeffs(pr.p, pr.n, coeffs);
        note(
            &mut fails,
            &x * &x.inv()? == FamilyElement::one(pr.p, pr.n, pr.m),
            || format!("x x^-1 != 1 for {x}"),
        );
    }
    Ok(fails)
}

fn hecke_operators(pr: Params, r: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let mut fails = Vec::new();
    for _ in 0..ROUNDS {
        let f = QExp::random(r, pr.p, pr.n, pr.m, pr.q, -1);
        note(
            &mut fails,
            u_op(&v_op(&f)) == f.truncate(pr.q / pr.p as usize),
            || "U V != id".into(),
        );
        let dep = deplete(&f);
        note(&mut fails, u_op(&dep).is_zero(), || {
            "U kills no depletion".into()
        });
        note(&mut fails, deplete(&dep) == dep, || {
            "depletion not idempotent".into()
        });
    }
    Ok(fails)
}

fn connection_closed_form(pr: Params, r: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let mut fails = Vec::new();
    for round in 0..ROUNDS {
        let k = Weight::new(0, FamilyElement::random(r, pr.p, pr.n, pr.m, 0));
        let w = NearlyExp::random(r, k, round % 3, pr.q.min(24), 0);
        let times = r.gen_range(0..5u32);
        let mut it = w.clone();
        for _ in 0..times {
            it = nabla(&it);
        }
        note(&mut fails, nabla_n_closed(&w, times) == it, || {
            format!("closed form differs at {times} steps")
        });
        note(&mut fails, u_nearly(&v_nearly(&w)) == w, || {
            "U V != id on nearly forms".into()
        });
    }
    Ok(fails)
}

fn projection_kills_derivatives(pr: Params, r: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let mut fails = Vec::new();
    let m = pr.m.max(2);
    for round in 0..ROUNDS {
        let mut coeffs = FamilyElement::random(r, pr.p, pr.n, m, 0).coeffs().to_vec();
        coeffs[0] = PadicScalar::random_unit(r, pr.p, pr.n);
        coeffs[1] = PadicScalar::one(pr.p, pr.n);
        let k = Weight::new(0, FamilyElement::from_coeffs(pr.p, pr.n, coeffs));
        let w = NearlyExp::random(r, k.clone(), round % 4, pr.q.min(24), 0);
        let out = hdagger(&nabla(&w), &k, i64::MIN)?;
        note(&mut fails, out.form.is_zero(), || {
            format!(
                "projection of a derivative is nonzero (degree {})",
                round % 4
            )
        });
    }
    Ok(fails)
}

fn theta_of_depleted_eisenstein(pr: Params, _: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let mut fails = Vec::new();
    for k in [4i64, 6] {
        let dep = deplete(&eisenstein_classical(pr.p, pr.n, 1, k as usize, pr.q)?);
        for rr in 0..=3 {
            let s = Weight::integer(pr.p, pr.n, 1, rr);
            let theta = theta_eisenstein(&s, &Weight::integer(pr.p, pr.n, 1, k), pr.q)?;
            note(&mut fails, theta == partial_s(&dep, &s, 0)?, || {
                format!("k = {k}, r = {rr}")
            });
        }
    }
    Ok(fails)
}

fn newton_and_factor(pr: Params, r: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let mut fails = Vec::new();
    for _ in 0..ROUNDS {
        let vals: Vec<i64> = (0..r.gen_range(1..5)).map(|_| r.gen_range(0..4)).collect();
        let roots: Vec<PadicScalar> = vals
            .iter()
            .map(|v| PadicScalar::random_unit(r, pr.p, pr.n) * PadicScalar::p_power(pr.p, pr.n, *v))
            .collect();
        let poly = PadicPoly::from_roots(pr.p, pr.n, &roots);
        let mut expected = vals.clone();
        expected.sort();
        let slopes: Vec<i64> = newton_polygon(&poly)
            .iter()
            .flat_map(|(s, l)| match s {
                Slope::Finite(x) => vec![x.to_integer(); *l],
                Slope::Infinite => vec![],
            })
            .collect();
        note(&mut fails, slopes == expected, || {
            format!("slopes {slopes:?}, expected {expected:?}")
        });
        let h = Ratio::from_integer(expected[expected.len() / 2]);
        let (le, gt) = slope_factor(&poly, h)?;
        note(&mut fails, le.mul(&gt) == poly, || {
            format!("factorization at {h} does not multiply back")
        });
    }
    Ok(fails)
}

fn riesz(pr: Params, r: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let mut fails = Vec::new();
    for round in 0..ROUNDS {
        let size = 1 + round % 4;
        let mut m = Matrix::random(r, pr.p, pr.n, size, size, 0);
        for i in 0..size {
            let d = m.get(i, i) + PadicScalar::p_power(pr.p, pr.n, (i % 2) as i64);
            m.set(i, i, d);
        }
        let e = riesz_projector(&m, Ratio::from_integer(0))?;
        note(&mut fails, e.mul(&e) == e, || {
            format!("projector not idempotent (size {size})")
        });
        note(&mut fails, e.mul(&m) == m.mul(&e), || {
            format!("projector does not commute (size {size})")
        });
    }
    Ok(fails)
}

fn fredholm(pr: Params, r: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let mut fails = Vec::new();
    for _ in 0..ROUNDS / 2 {
        let blocks: Vec<Matrix> = (0..3)
            .map(|_| {
                let s = r.gen_range(1..3);
                Matrix::random(r, pr.p, pr.n, s, s, 0)
            })
            .collect();
        let op = synthetic_filtered_u(&blocks, pr.n, r);
        let report = check_fredholm_factorization(&op);
        note(&mut fails, report.pass, || {
            format!("factorization fails: {}", json!(report))
        });
    }
    Ok(fails)
}

fn stabilizations(pr: Params, _: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let mut fails = Vec::new();
    let mut forms: Vec<EigenformData> = [4u32, 6, 8]
        .iter()
        .map(|&k| EigenformData::eisenstein(pr.p, pr.n, k))
        .collect();
    forms.push(EigenformData::delta(pr.p, pr.n));
    for f in &forms {
        let (a, b) = solve_hecke_quadratic(f)?;
        note(&mut fails, a + b == f.a_p, || {
            format!("{}: alpha + beta != a_p", f.label)
        });
        let pair = stabilize(f, pr.n, pr.q.min(60))?;
        note(
            &mut fails,
            u_op(&pair.f_alpha) == pair.f_alpha.truncate(pr.q.min(60) / pr.p as usize).scale(a),
            || format!("{}: U f_alpha != alpha f_alpha", f.label),
        );
        note(&mut fails, pair.recover()? == pair.f, || {
            format!("{}: stabilizations do not recover f", f.label)
        });
    }
    Ok(fails)
}

fn bracket_two_ways(pr: Params, _: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let mut fails = Vec::new();
    let e = |k| EigenformData::eisenstein(pr.p, pr.n, k);
    for (f, g, h, t) in [
        (e(8), e(4), e(4), 0),
        (e(12), e(4), e(6), 1),
        (EigenformData::delta(pr.p, pr.n), e(4), e(6), 1),
    ] {
        let factors = EulerFactors::at_point(&f, &g, &h, t)?;
        let a = interpolation_bracket(&factors)?;
        let b = bracket_by_stabilizations(&factors)?;
        note(&mut fails, a == b, || {
            format!("{} at t = {t}: {a} vs {b}", f.label)
        });
    }
    Ok(fails)
}

fn symbolic(_: Params, _: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let check = symbolic_bracket_identity()?;
    let mut fails = Vec::new();
    note(&mut fails, check.holds, || {
        format!("identity fails: {}", json!(check))
    });
    Ok(fails)
}

fn json_round_trip(pr: Params, r: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let mut fails = Vec::new();
    for _ in 0..ROUNDS {
        let f = QExp::random(r, pr.p, pr.n, pr.m, 12, -2);
        let back = QExp::from_json(
            pr.p,
            pr.n,
            &serde_json::from_str(&serde_json::to_string(&f.to_json())?)?,
        )?;
        note(&mut fails, back == f, || {
            "q-expansion changed across JSON".into()
        });
        let m = Matrix::random(r, pr.p, pr.n, 3, 3, -1);
        let back = Matrix::from_json(&serde_json::from_str(&serde_json::to_string(
            &m.to_json(None),
        )?)?)?;
        note(&mut fails, back == m, || {
            "matrix changed across JSON".into()
        });
    }
    Ok(fails)
}

fn run_check(i: usize, pr: Params, seed: u64) -> Outcome {
    let (name, check) = CHECKS[i];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let failures = match check(pr, &mut rng) {
        Ok(f) => f,
        Err(e) => vec![format!("error: {e:#}")],
    };
    Outcome {
        name,
        pass: failures.is_empty(),
        failures,
    }
}

pub fn run(ctx: &Context, jobs: usize) -> Result<Value> {
    let pr = Params {
        p: ctx.p,
        n: ctx.n,
        m: ctx.m.min(3),
        q: ctx.q.min(60),
    };
    let indices: Vec<usize> = (0..CHECKS.len()).collect();
    let chunk = indices.len().div_ceil(jobs);
    let mut outcomes: Vec<(usize, Outcome)> = thread::scope(|s| {
        let handles: Vec<_> = indices
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|&i| (i, run_check(i, pr, ctx.seed)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("selftest worker panicked"))
            .collect()
    });
    outcomes.sort_by_key(|(i, _)| *i);
    let checks: Vec<Outcome> = outcomes.into_iter().map(|(_, o)| o).collect();
    let failed = checks.iter().filter(|o| !o.pass).count();
    Ok(json!({
        "context": ctx,
        "checks": checks,
        "passed": checks.len() - failed,
        "failed": failed,
        "pass": failed == 0,
    }))
}
