//! Nearly overconvergent expansions `Σ_h g_h V_{k,h}`, the Gauss-Manin connection,
//! its integer and fractional iterates, twists, and overconvergent projection.

use std::ops::{Add, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{binomial, tame_order, PadicScalar};
use crate::qexp::{
    self, partial_pow, partial_s_with, twist_chi, u_op, v_op, weight_table, QExp, QExpJson,
};
use crate::ring::{
    check_admissibility, AssumptionReport, FamilyElement, TameCharacter, Weight, WeightJson,
};

/// Default tail order `2p^2 + 8` for the fractional iterate.
pub fn default_tail_order(p: u32) -> usize {
    2 * (p as usize).pow(2) + 8
}

#[derive(Clone, Debug)]
pub struct NearlyExp {
    weight: Weight,
    comps: Vec<QExp>,
}

impl NearlyExp {
    pub fn new(weight: Weight, comps: Vec<QExp>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::InvalidInput(
                "nearly expansion without components".into(),
            ));
        }
        for c in &comps {
            if c.p() != weight.p() || c.m() != weight.m() {
                return Err(Error::ContextMismatch(
                    "component ring differs from weight ring".into(),
                ));
            }
        }
        Ok(NearlyExp { weight, comps })
    }

    pub fn from_qexp(weight: Weight, f: QExp) -> Self {
        NearlyExp {
            weight,
            comps: vec![f],
        }
    }

    pub fn zero(weight: Weight, degree: usize, q: usize) -> Self {
        let (p, n, m) = (weight.p(), weight.n(), weight.m());
        NearlyExp {
            comps: vec![QExp::zero(p, n, m, q); degree + 1],
            weight,
        }
    }

    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        weight: Weight,
        degree: usize,
        q: usize,
        min_val: i64,
    ) -> Self {
        let (p, n, m) = (weight.p(), weight.n(), weight.m());
        let comps = (0..=degree)
            .map(|_| QExp::random(rng, p, n, m, q, min_val))
            .collect();
        NearlyExp { weight, comps }
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn degree(&self) -> usize {
        self.comps.len() - 1
    }

    pub fn comps(&self) -> &[QExp] {
        &self.comps
    }

    pub fn comp(&self, h: usize) -> &QExp {
        &self.comps[h]
    }

    pub fn p(&self) -> u32 {
        self.weight.p()
    }

    /// Common q-precision of the components.
    pub fn prec(&self) -> usize {
        self.comps.iter().map(|c| c.prec()).min().unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.is_zero())
    }

    pub fn is_depleted(&self) -> bool {
        self.comps.iter().all(|c| c.is_depleted())
    }

    pub fn with_weight(&self, weight: Weight) -> NearlyExp {
        NearlyExp {
            weight,
            comps: self.comps.clone(),
        }
    }

    pub fn map(&self, f: impl Fn(&QExp) -> QExp) -> NearlyExp {
        NearlyExp {
            weight: self.weight.clone(),
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn scale(&self, c: PadicScalar) -> NearlyExp {
        self.map(|g| g.scale(c))
    }

    pub fn deplete(&self) -> NearlyExp {
        self.map(qexp::deplete)
    }

    pub fn specialize(&self, t0: PadicScalar) -> NearlyExp {
        NearlyExp {
            weight: self.weight.specialize(t0),
            comps: self.comps.iter().map(|g| g.specialize(t0)).collect(),
        }
    }

    fn padded(&self, degree: usize) -> Vec<QExp> {
        let q = self.prec();
        let mut comps = self.comps.clone();
        let (p, n, m) = (self.p(), self.weight.n(), self.weight.m());
        comps.resize(degree + 1, QExp::zero(p, n, m, q));
        comps
    }

    pub fn to_json(&self) -> NearlyJson {
        NearlyJson {
            weight: self.weight.to_json(),
            degree: self.degree(),
            comps: self.comps.iter().map(|c| c.to_json()).collect(),
        }
    }

    pub fn from_json(j: &NearlyJson) -> Result<Self> {
        let weight = Weight::from_json(&j.weight)?;
        if j.comps.len() != j.degree + 1 {
            return Err(Error::Malformed(format!(
                "degree {} but {} components supplied",
                j.degree,
                j.comps.len()
            )));
        }
        let comps = j
            .comps
            .iter()
            .map(|c| QExp::from_json(weight.p(), weight.n(), c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(weight, comps).map_err(|e| Error::Malformed(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NearlyJson {
    pub weight: WeightJson,
    pub degree: usize,
    pub comps: Vec<QExpJson>,
}

/// Equal weights and equal components, missing components read as zero.
impl PartialEq for NearlyExp {
    fn eq(&self, other: &Self) -> bool {
        let d = self.degree().max(other.degree());
        self.weight.same_character(&other.weight)
            && self
                .padded(d)
                .iter()
                .zip(other.padded(d).iter())
                .all(|(a, b)| a == b)
    }
}

impl<'a> Add<&'a NearlyExp> for &'a NearlyExp {
    type Output = NearlyExp;
    fn add(self, b: &NearlyExp) -> NearlyExp {
        let d = self.degree().max(b.degree());
        let comps = self
            .padded(d)
            .iter()
            .zip(b.padded(d).iter())
            .map(|(x, y)| x + y)
            .collect();
        NearlyExp {
            weight: self.weight.clone(),
            comps,
        }
    }
}

impl<'a> Sub<&'a NearlyExp> for &'a NearlyExp {
    type Output = NearlyExp;
    fn sub(self, b: &NearlyExp) -> NearlyExp {
        let d = self.degree().max(b.degree());
        let comps = self
            .padded(d)
            .iter()
            .zip(b.padded(d).iter())
            .map(|(x, y)| x - y)
            .collect();
        NearlyExp {
            weight: self.weight.clone(),
            comps,
        }
    }
}

/// Product with `V_{k,h} V_{k',h'} = V_{k+k',h+h'}`.
pub fn mul(w: &NearlyExp, v: &NearlyExp) -> NearlyExp {
    let q = w.prec().min(v.prec());
    let weight = w.weight.combine(&v.weight, 1);
    let mut out = NearlyExp::zero(weight, w.degree() + v.degree(), q);
    for (h, g) in w.comps.iter().enumerate() {
        for (hh, gg) in v.comps.iter().enumerate() {
            out.comps[h + hh] = &out.comps[h + hh] + &(g * gg);
        }
    }
    out
}

/// One application of the connection, raising weight by 2 and degree by 1.
pub fn nabla(w: &NearlyExp) -> NearlyExp {
    let q = w.prec();
    let u = w.weight.u();
    let mut out = NearlyExp::zero(w.weight.shift(2), w.degree() + 1, q);
    for (h, g) in w.comps.iter().enumerate() {
        out.comps[h] = &out.comps[h] + &qexp::partial(g).truncate(q);
        let factor = u.add_int(-(h as i128));
        out.comps[h + 1] = &out.comps[h + 1] + &g.truncate(q).scale_family(&factor);
    }
    out
}

/// `a_{N,k,h,j} = C(N,j) Π_{i<j} (u_k - h + N - 1 - i)`.
pub fn nabla_coefficient(u_k: &FamilyElement, big_n: u32, h: usize, j: u32) -> FamilyElement {
    if j > big_n {
        return FamilyElement::zero(u_k.p(), u_k.n(), u_k.m());
    }
    let mut acc = u_k.mul_int(0).add_int(binom_int(big_n, j));
    for i in 0..j {
        acc = &acc * &u_k.add_int(big_n as i128 - h as i128 - 1 - i as i128);
    }
    acc
}

fn binom_int(n: u32, k: u32) -> i128 {
    let mut r: i128 = 1;
    for i in 0..k {
        r = r * (n - i) as i128 / (i + 1) as i128;
    }
    r
}

/// Table `a_{n,k,h,j}` for `n ≤ n_max` built from `a_{n+1,j} = a_{n,j} + (u_k+2n-h-j+1) a_{n,j-1}`.
pub fn nabla_coefficients_by_recurrence(
    u_k: &FamilyElement,
    n_max: u32,
    h: usize,
) -> Vec<Vec<FamilyElement>> {
    let zero = FamilyElement::zero(u_k.p(), u_k.n(), u_k.m());
    let mut rows = vec![vec![u_k.mul_int(0).add_int(1)]];
    for n in 0..n_max {
        let prev = &rows[n as usize];
        let mut next = Vec::with_capacity(n as usize + 2);
        for j in 0..=n as usize + 1 {
            let keep = prev.get(j).cloned().unwrap_or_else(|| zero.clone());
            let raised = if j == 0 {
                zero.clone()
            } else {
                let f = u_k.add_int(2 * n as i128 - h as i128 - j as i128 + 1);
                &f * &prev[j - 1]
            };
            next.push(&keep + &raised);
        }
        rows.push(next);
    }
    rows
}

/// `∇^N` through the closed form.
pub fn nabla_n_closed(w: &NearlyExp, big_n: u32) -> NearlyExp {
    if big_n == 0 {
        return w.clone();
    }
    let q = w.prec();
    let u = w.weight.u();
    let mut out = NearlyExp::zero(
        w.weight.shift(2 * big_n as i64),
        w.degree() + big_n as usize,
        q,
    );
    for (h, g) in w.comps.iter().enumerate() {
        let g = g.truncate(q);
        for j in 0..=big_n {
            let a = nabla_coefficient(u, big_n, h, j);
            let term = partial_pow(&g, big_n - j).scale_family(&a);
            let idx = j as usize + h;
            out.comps[idx] = &out.comps[idx] + &term;
        }
    }
    out
}

/// Component-wise `θ^χ`; the weight picks up `χ^2`.
pub fn twist_nearly(w: &NearlyExp, chi: &TameCharacter) -> NearlyExp {
    NearlyExp {
        weight: w.weight.twist(chi, 2),
        comps: w.comps.iter().map(|g| twist_chi(g, chi)).collect(),
    }
}

/// `θ^{χ'}(∇^a f)`.
pub fn nabla_a_chi(f: &NearlyExp, a: u32, chi: &TameCharacter) -> NearlyExp {
    twist_nearly(&nabla_n_closed(f, a), chi)
}

pub fn v_nearly(w: &NearlyExp) -> NearlyExp {
    let p = w.p();
    let n = w.weight.n();
    NearlyExp {
        weight: w.weight.clone(),
        comps: w
            .comps
            .iter()
            .enumerate()
            .map(|(h, g)| v_op(g).scale(PadicScalar::p_power(p, n, -(h as i64))))
            .collect(),
    }
}

pub fn u_nearly(w: &NearlyExp) -> NearlyExp {
    let p = w.p();
    let n = w.weight.n();
    NearlyExp {
        weight: w.weight.clone(),
        comps: w
            .comps
            .iter()
            .enumerate()
            .map(|(h, g)| u_op(g).scale(PadicScalar::p_power(p, n, h as i64)))
            .collect(),
    }
}

pub fn fil0_project(w: &NearlyExp) -> QExp {
    w.comps[0].clone()
}

/// Output of the fractional iterate with its convergence record.
#[derive(Clone, Debug)]
pub struct FractionalIterate {
    pub value: NearlyExp,
    /// Valuation of the contribution of each `j = 0..=J` (summed over `h`).
    pub term_valuations: Vec<i64>,
    /// Minimum term valuation over the final window of `p` terms.
    pub achieved: i64,
    pub report: Option<AssumptionReport>,
}

/// The series `Σ_j C(u_s,j) Π_{i<j}(u_k+u_s-h-1-i) ∂_s(g_h, s, j) V_{k+2s, j+h}` for `j ≤ J`.
pub fn nabla_s_series(
    w: &NearlyExp,
    s: &Weight,
    order: usize,
    floor: i64,
) -> Result<FractionalIterate> {
    if !w.is_depleted() {
        return Err(Error::NotDepleted);
    }
    let q = w.prec();
    let table = weight_table(s, q)?;
    let u_k = w.weight.u();
    let u_s = s.u();
    let p = w.p();
    let weight = w.weight.combine(s, 2);
    let mut out = NearlyExp::zero(weight, w.degree() + order, q);
    let mut term_valuations = vec![i64::MAX; order + 1];
    let binoms: Vec<FamilyElement> = (0..=order as u64).map(|j| binomial(u_s, j)).collect();
    for (h, g) in w.comps.iter().enumerate() {
        let g = g.truncate(q);
        let base = u_k.add_int(-(h as i128) - 1);
        let sum_u = &base + u_s;
        let mut poch = u_k.mul_int(0).add_int(1);
        for j in 0..=order {
            if j > 0 {
                poch = &poch * &sum_u.add_int(-(j as i128 - 1));
            }
            let c = &binoms[j] * &poch;
            if c.is_exact_zero() {
                continue;
            }
            let term = partial_s_with(&g, &table, j as u32).scale_family(&c);
            term_valuations[j] = term_valuations[j].min(term.valuation());
            out.comps[j + h] = &out.comps[j + h] + &term;
        }
    }
    let window = order + 1 - (p as usize).min(order + 1);
    let achieved = term_valuations[window..].iter().copied().min().unwrap();
    if achieved < floor {
        return Err(Error::TailNotConverged {
            order,
            achieved,
            target: floor,
        });
    }
    Ok(FractionalIterate {
        value: trim(out),
        term_valuations,
        achieved,
        report: None,
    })
}

fn trim(mut w: NearlyExp) -> NearlyExp {
    while w.comps.len() > 1
        && w.comps
            .last()
            .unwrap()
            .coeffs()
            .iter()
            .all(|c| c.is_exact_zero())
    {
        w.comps.pop();
    }
    w
}

/// The fractional iterate through the reduction to strict weights: integer shifts,
/// tame twists and the strict series.
pub fn nabla_s_reduced(
    w: &NearlyExp,
    s: &Weight,
    order: usize,
    floor: i64,
) -> Result<FractionalIterate> {
    if !w.is_depleted() {
        return Err(Error::NotDepleted);
    }
    let report = check_admissibility(&w.weight, s)?;
    let p = w.p();
    let order_t = tame_order(p) as i64;
    let eps = TameCharacter::new(p, report.chi_k as i64 / 2);
    let w1 = twist_nearly(w, &eps.inverse());
    let w2 = nabla_n_closed(&w1, report.alpha as u32);
    let strict_u = s.u().add_int(-(report.b + report.beta) as i128);
    let s_strict = Weight::new(0, strict_u);
    let series = nabla_s_series(&w2, &s_strict, order, floor)?;
    let m = report.beta - report.alpha + report.b;
    let w4 = nabla_n_closed(&series.value, m as u32);
    let last = TameCharacter::new(
        p,
        (s.tame() as i64 - report.beta - report.b).rem_euclid(order_t),
    );
    let w5 = twist_nearly(&w4, &eps.mul(&last));
    Ok(FractionalIterate {
        value: w5.with_weight(w.weight.combine(s, 2)),
        term_valuations: series.term_valuations,
        achieved: series.achieved,
        report: Some(report),
    })
}

/// `∇^s` on a depleted expansion. Nonnegative integer and strict weights use the series
/// directly; every other admissible weight goes through the reduction.
pub fn nabla_s(w: &NearlyExp, s: &Weight, order: usize, floor: i64) -> Result<FractionalIterate> {
    let report = check_admissibility(&w.weight, s)?;
    let mut out = match s.classical() {
        Some(m) if m >= 0 => nabla_s_series(w, s, order.max(m as usize), floor)?,
        _ if s.is_strict() => nabla_s_series(w, s, order, floor)?,
        _ => nabla_s_reduced(w, s, order, floor)?,
    };
    out.report = Some(report);
    Ok(out)
}

/// Overconvergent projection with its precision accounting.
#[derive(Clone, Debug)]
pub struct Projection {
    pub form: QExp,
    /// `max_i v(u_k (u_k - 1) ... (u_k - i + 1))`, the digits spent on denominators.
    pub precision_loss: i64,
}

/// `H†(γ) = Σ_i (-1)^i ∂^i γ_i / (u_k (u_k - 1) ... (u_k - i + 1))` for `γ` of weight `k + 2`.
pub fn hdagger(gamma: &NearlyExp, k: &Weight, floor: i64) -> Result<Projection> {
    let expected = k.shift(2);
    if !expected.same_character(&gamma.weight) {
        return Err(Error::WeightMismatch(format!(
            "expansion has weight {}, expected {}",
            gamma.weight, expected
        )));
    }
    let q = gamma.prec();
    let u = k.u();
    let mut denom = u.mul_int(0).add_int(1);
    let mut loss = 0i64;
    let mut form = gamma.comps[0].truncate(q);
    for i in 1..=gamma.degree() {
        let factor = u.add_int(-(i as i128 - 1));
        if factor.constant_term().is_zero() {
            return Err(Error::Pole(i as i64 - 1));
        }
        denom = &denom * &factor;
        loss = loss.max(denom.constant_term().valuation());
        let mut term =
            partial_pow(&gamma.comps[i].truncate(q), i as u32).scale_family(&denom.inv()?);
        if i % 2 == 1 {
            term = -&term;
        }
        form = &form + &term;
    }
    let achieved = form.abs_prec();
    if achieved < floor {
        return Err(Error::PrecisionFloor { achieved, floor });
    }
    Ok(Projection {
        form,
        precision_loss: loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qexp::deplete;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const P: u32 = 5;
    const N: u32 = 12;
    const M: usize = 3;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn family_weight(r: &mut ChaCha8Rng) -> Weight {
        Weight::new(0, FamilyElement::random(r, P, N, M, 0))
    }

    #[test]
    fn nabla_of_degree_zero() {
        let mut r = rng(1);
        let k = family_weight(&mut r);
        let a = QExp::random(&mut r, P, N, M, 20, 0);
        let w = NearlyExp::from_qexp(k.clone(), a.clone());
        let d = nabla(&w);
        assert_eq!(d.comp(0), &qexp::partial(&a));
        assert_eq!(d.comp(1), &a.scale_family(k.u()));
        let one = NearlyExp::from_qexp(Weight::integer(P, N, M, 0), QExp::monomial(P, N, M, 0, 10));
        assert!(nabla(&one).is_zero());
    }

    #[test]
    fn second_iterate_coefficient() {
        let mut r = rng(2);
        let u = FamilyElement::random(&mut r, P, N, M, 0);
        assert_eq!(nabla_coefficient(&u, 2, 0, 1), u.add_int(1).mul_int(2));
        let a = QExp::random(&mut r, P, N, M, 20, 0);
        let w = NearlyExp::from_qexp(Weight::new(0, u.clone()), a.clone());
        let twice = nabla(&nabla(&w));
        let expected =
            &qexp::partial(&a).scale_family(&u.add_int(1).mul_int(2)) + &QExp::zero(P, N, M, 20);
        assert_eq!(twice.comp(1), &expected);
    }

    #[test]
    fn closed_form_small_cases() {
        let mut r = rng(3);
        let k = family_weight(&mut r);
        let w = NearlyExp::random(&mut r, k, 2, 15, 0);
        assert_eq!(nabla_n_closed(&w, 0), w);
        assert_eq!(nabla_n_closed(&w, 1), nabla(&w));
    }

    #[test]
    fn hdagger_examples() {
        let k = Weight::integer(P, N, M, 3);
        let g0 = QExp::random(&mut rng(4), P, N, M, 10, 0);
        let gamma =
            NearlyExp::new(k.shift(2), vec![g0.clone(), QExp::monomial(P, N, M, 1, 10)]).unwrap();
        let out = hdagger(&gamma, &k, 0).unwrap().form;
        let third = PadicScalar::from_ratio(P, N, 1, 3).unwrap();
        assert_eq!(out, &g0 - &QExp::monomial(P, N, M, 1, 10).scale(third));

        let a = NearlyExp::from_qexp(k.clone(), QExp::random(&mut rng(5), P, N, M, 10, 0));
        assert!(hdagger(&nabla(&a), &k, 0).unwrap().form.is_zero());

        let d0 = NearlyExp::from_qexp(k.shift(2), g0.clone());
        assert_eq!(hdagger(&d0, &k, 0).unwrap().form, g0);
    }

    #[test]
    fn hdagger_poles() {
        let k = Weight::integer(P, N, M, 1);
        let w = NearlyExp::random(&mut rng(6), k.clone(), 2, 10, 0);
        assert!(matches!(hdagger(&nabla(&w), &k, 0), Err(Error::Pole(1))));
        let k7 = Weight::integer(P, N, M, 7);
        assert!(hdagger(&nabla(&w.with_weight(k7.clone())), &k7, 0).is_ok());
    }

    #[test]
    fn twist_commutes_with_nabla_on_depleted() {
        let mut r = rng(7);
        let k = family_weight(&mut r);
        let w = NearlyExp::random(&mut r, k, 1, 30, 0).deplete();
        let chi = TameCharacter::new(P, 3);
        let a = nabla_a_chi(&w, 3, &chi);
        let b = nabla_n_closed(&twist_nearly(&w, &chi), 3);
        assert_eq!(a.comps(), b.comps());
        assert_eq!(
            nabla_a_chi(&w, 2, &TameCharacter::trivial(P)),
            nabla_n_closed(&w, 2).deplete()
        );
    }

    #[test]
    fn integer_fractional_iterate_is_exact() {
        let mut r = rng(8);
        let k = Weight::new(0, FamilyElement::random(&mut r, P, N, M, 1));
        let w = NearlyExp::random(&mut r, k, 1, 30, 0).deplete();
        for m in 0..4 {
            let s = Weight::integer(P, N, M, m);
            let it = nabla_s(&w, &s, default_tail_order(P), 6).unwrap();
            assert_eq!(it.value, nabla_n_closed(&w, m as u32), "m={m}");
        }
    }

    #[test]
    fn reduction_agrees_with_series_for_strict_s() {
        let mut r = rng(9);
        let k = Weight::integer(P, N, M, 4);
        let w = NearlyExp::from_qexp(k, deplete(&QExp::random(&mut r, P, N, M, 25, 0)));
        let s = Weight::new(0, FamilyElement::random(&mut r, P, N, M, 1));
        let a = nabla_s_series(&w, &s, 60, 4).unwrap();
        let b = nabla_s_reduced(&w, &s, 60, 4).unwrap();
        let d = a.value.degree().min(b.value.degree());
        for h in 0..=d {
            assert_eq!(a.value.comp(h), b.value.comp(h), "h={h}");
        }
    }

    #[test]
    fn json_round_trip() {
        let mut r = rng(10);
        let k = family_weight(&mut r);
        let w = NearlyExp::random(&mut r, k, 2, 6, -1);
        let j = serde_json::to_string(&w.to_json()).unwrap();
        let back = NearlyExp::from_json(&serde_json::from_str(&j).unwrap()).unwrap();
        assert_eq!(back, w);
    }
}
