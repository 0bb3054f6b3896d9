//! Truncated family rings `Q_p[T]/T^M` and weight characters.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{
    self, inv_factorial, one_unit_part, pexp, plog, strict_valuation, tame_order, teichmuller,
    PadicAlgebra, PadicScalar, ScalarJson,
};

/// An element `c_0 + c_1 T + ... + c_{M-1} T^{M-1}` of the truncated family ring.
#[derive(Clone, Debug)]
pub struct FamilyElement {
    p: u32,
    n: u32,
    coeffs: Vec<PadicScalar>,
}

impl FamilyElement {
    pub fn from_coeffs(p: u32, n: u32, coeffs: Vec<PadicScalar>) -> Self {
        assert!(!coeffs.is_empty(), "family truncation M must be at least 1");
        FamilyElement { p, n, coeffs }
    }

    pub fn zero(p: u32, n: u32, m: usize) -> Self {
        Self::from_coeffs(p, n, vec![PadicScalar::zero(p); m])
    }

    pub fn constant(c: PadicScalar, n: u32, m: usize) -> Self {
        let mut coeffs = vec![PadicScalar::zero(c.p()); m];
        coeffs[0] = c;
        Self::from_coeffs(c.p(), n, coeffs)
    }

    pub fn from_int(p: u32, n: u32, m: usize, x: i128) -> Self {
        Self::constant(PadicScalar::from_int(p, n, x), n, m)
    }

    pub fn one(p: u32, n: u32, m: usize) -> Self {
        Self::from_int(p, n, m, 1)
    }

    /// The family variable `T` (zero when `M = 1`).
    pub fn variable(p: u32, n: u32, m: usize) -> Self {
        let mut e = Self::zero(p, n, m);
        if m > 1 {
            e.coeffs[1] = PadicScalar::one(p, n);
        }
        e
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, p: u32, n: u32, m: usize, min_val: i64) -> Self {
        let coeffs = (0..m)
            .map(|_| PadicScalar::random(rng, p, n, min_val))
            .collect();
        Self::from_coeffs(p, n, coeffs)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[PadicScalar] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> PadicScalar {
        self.coeffs[i]
    }

    pub fn constant_term(&self) -> PadicScalar {
        self.coeffs[0]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn is_exact_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_exact_zero())
    }

    /// Whether every coefficient is an integer-valued constant, i.e. `u = c` with `c` in `Z`.
    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|c| c.is_exact_zero())
    }

    /// Minimum valuation over the coefficients (Gauss norm).
    pub fn valuation(&self) -> i64 {
        self.coeffs.iter().map(|c| c.valuation()).min().unwrap()
    }

    /// Minimum absolute precision over the coefficients.
    pub fn abs_prec(&self) -> i64 {
        self.coeffs.iter().map(|c| c.abs_prec()).min().unwrap()
    }

    pub fn scale(&self, c: PadicScalar) -> Self {
        if c.is_exact_zero() {
            return Self::zero(self.p, self.n, self.m());
        }
        let coeffs = self.coeffs.iter().map(|x| *x * c).collect();
        Self::from_coeffs(self.p, self.n, coeffs)
    }

    pub fn mul_int(&self, x: i128) -> Self {
        self.scale(PadicScalar::from_int(self.p, self.n, x))
    }

    pub fn add_int(&self, x: i128) -> Self {
        let mut r = self.clone();
        r.coeffs[0] += PadicScalar::from_int(self.p, self.n, x);
        r
    }

    pub fn inv(&self) -> Result<Self> {
        let c0 = self.coeffs[0];
        let c0_inv = c0.inv()?;
        let one = Self::one(self.p, self.n, self.m());
        let nil = self.scale(c0_inv) - one.clone();
        let neg = -nil;
        let mut sum = one.clone();
        let mut power = one;
        for _ in 1..self.m() {
            power = &power * &neg;
            sum = &sum + &power;
        }
        Ok(sum.scale(c0_inv))
    }

    pub fn try_div(&self, other: &Self) -> Result<Self> {
        Ok(self * &other.inv()?)
    }

    /// `exp` of a family element whose constant term lies in the convergence domain.
    pub fn exp(&self) -> Result<Self> {
        let e0 = pexp(self.coeffs[0])?;
        let mut nil = self.clone();
        nil.coeffs[0] = PadicScalar::zero(self.p);
        let one = Self::one(self.p, self.n, self.m());
        let mut sum = one.clone();
        let mut power = one;
        for j in 1..self.m() as u64 {
            power = &power * &nil;
            sum = &sum + &power.scale(inv_factorial(self.p, self.n, j));
        }
        Ok(sum.scale(e0))
    }

    /// Value at `T = t0`. The truncated tail is assumed bounded by the known coefficients,
    /// so the result is capped at absolute precision `M v(t0) + v(self)`.
    pub fn eval(&self, t0: PadicScalar) -> PadicScalar {
        let mut acc = PadicScalar::zero(self.p);
        for c in self.coeffs.iter().rev() {
            acc = acc * t0 + *c;
        }
        if t0.is_exact_zero() || self.m() == 0 {
            return acc;
        }
        let cap = (self.m() as i64)
            .saturating_mul(t0.valuation())
            .saturating_add(self.valuation());
        acc.reduce_abs(cap)
    }

    pub fn to_json(&self) -> Vec<ScalarJson> {
        self.coeffs.iter().map(|c| c.serialize_repr()).collect()
    }

    pub fn from_json(p: u32, n: u32, coeffs: &[ScalarJson]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Malformed(
                "family element with no coefficients".into(),
            ));
        }
        let coeffs = coeffs
            .iter()
            .map(|c| PadicScalar::from_repr(p, c))
            .collect::<Result<_>>()?;
        Ok(Self::from_coeffs(p, n, coeffs))
    }
}

impl PartialEq for FamilyElement {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p
            && self.m() == other.m()
            && self.coeffs.iter().zip(&other.coeffs).all(|(a, b)| a == b)
    }
}

impl fmt::Display for FamilyElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_exact_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "({c})")?,
                1 => write!(f, "({c})T")?,
                _ => write!(f, "({c})T^{i}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl<'a> Add<&'a FamilyElement> for &'a FamilyElement {
    type Output = FamilyElement;
    fn add(self, b: &FamilyElement) -> FamilyElement {
        debug_assert_eq!(self.m(), b.m(), "mixed family truncations");
        let coeffs = self
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(x, y)| *x + *y)
            .collect();
        FamilyElement::from_coeffs(self.p, self.n, coeffs)
    }
}

impl<'a> Sub<&'a FamilyElement> for &'a FamilyElement {
    type Output = FamilyElement;
    fn sub(self, b: &FamilyElement) -> FamilyElement {
        debug_assert_eq!(self.m(), b.m(), "mixed family truncations");
        let coeffs = self
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(x, y)| *x - *y)
            .collect();
        FamilyElement::from_coeffs(self.p, self.n, coeffs)
    }
}

impl<'a> Mul<&'a FamilyElement> for &'a FamilyElement {
    type Output = FamilyElement;
    fn mul(self, b: &FamilyElement) -> FamilyElement {
        debug_assert_eq!(self.m(), b.m(), "mixed family truncations");
        let m = self.m();
        let mut out = vec![PadicScalar::zero(self.p); m];
        for (i, x) in self.coeffs.iter().enumerate() {
            if x.is_exact_zero() {
                continue;
            }
            for (j, y) in b.coeffs[..m - i].iter().enumerate() {
                if !y.is_exact_zero() {
                    out[i + j] += *x * *y;
                }
            }
        }
        FamilyElement::from_coeffs(self.p, self.n, out)
    }
}

impl Neg for &FamilyElement {
    type Output = FamilyElement;
    fn neg(self) -> FamilyElement {
        let coeffs = self.coeffs.iter().map(|x| -*x).collect();
        FamilyElement::from_coeffs(self.p, self.n, coeffs)
    }
}

impl Add for FamilyElement {
    type Output = FamilyElement;
    fn add(self, b: FamilyElement) -> FamilyElement {
        &self + &b
    }
}

impl Sub for FamilyElement {
    type Output = FamilyElement;
    fn sub(self, b: FamilyElement) -> FamilyElement {
        &self - &b
    }
}

impl Mul for FamilyElement {
    type Output = FamilyElement;
    fn mul(self, b: FamilyElement) -> FamilyElement {
        &self * &b
    }
}

impl Neg for FamilyElement {
    type Output = FamilyElement;
    fn neg(self) -> FamilyElement {
        -&self
    }
}

impl PadicAlgebra for FamilyElement {
    fn prime(&self) -> u32 {
        self.p
    }
    fn one_like(&self) -> Self {
        Self::one(self.p, self.n, self.m())
    }
    fn scale(&self, c: PadicScalar) -> Self {
        FamilyElement::scale(self, c)
    }
    fn min_valuation(&self) -> i64 {
        self.valuation()
    }
    fn working_precision(&self) -> u32 {
        self.n
    }
}

/// A tame character `ω^i`, extended by zero on multiples of `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TameCharacter {
    pub p: u32,
    pub exponent: u32,
}

impl TameCharacter {
    pub fn new(p: u32, exponent: i64) -> Self {
        TameCharacter {
            p,
            exponent: exponent.rem_euclid(tame_order(p) as i64) as u32,
        }
    }

    pub fn trivial(p: u32) -> Self {
        Self::new(p, 0)
    }

    pub fn is_even(&self) -> bool {
        self.exponent.is_multiple_of(2)
    }

    pub fn inverse(&self) -> Self {
        Self::new(self.p, -(self.exponent as i64))
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::new(self.p, self.exponent as i64 + other.exponent as i64)
    }

    pub fn eval(&self, n: i128, prec: u32) -> PadicScalar {
        if n.rem_euclid(self.p as i128) == 0 {
            return PadicScalar::zero(self.p);
        }
        teichmuller(self.p, prec, n)
            .expect("unit")
            .pow(self.exponent as u64)
    }
}

/// A continuous character `t -> ω(t)^i exp(u log<t>)` of the p-adic units.
#[derive(Clone, Debug)]
pub struct Weight {
    tame: u32,
    u: FamilyElement,
    classical: Option<i64>,
}

impl Weight {
    pub fn new(tame: i64, u: FamilyElement) -> Self {
        let p = u.p();
        Weight {
            tame: tame.rem_euclid(tame_order(p) as i64) as u32,
            u,
            classical: None,
        }
    }

    /// The classical weight `t -> t^k`.
    pub fn integer(p: u32, n: u32, m: usize, k: i64) -> Self {
        let mut w = Self::new(k, FamilyElement::from_int(p, n, m, k as i128));
        w.classical = Some(k);
        w
    }

    pub fn p(&self) -> u32 {
        self.u.p()
    }

    pub fn n(&self) -> u32 {
        self.u.n()
    }

    pub fn m(&self) -> usize {
        self.u.m()
    }

    pub fn tame(&self) -> u32 {
        self.tame
    }

    pub fn u(&self) -> &FamilyElement {
        &self.u
    }

    pub fn classical(&self) -> Option<i64> {
        self.classical
    }

    pub fn character(&self) -> TameCharacter {
        TameCharacter {
            p: self.p(),
            exponent: self.tame,
        }
    }

    pub fn is_strict(&self) -> bool {
        self.tame == 0 && self.u.valuation() >= strict_valuation(self.p())
    }

    /// `κ(n)` in the family ring; zero when `p | n`.
    pub fn eval(&self, n: i128) -> Result<FamilyElement> {
        let (p, prec, m) = (self.p(), self.n(), self.m());
        if n.rem_euclid(p as i128) == 0 {
            return Ok(FamilyElement::zero(p, prec, m));
        }
        if let Some(k) = self.classical {
            let c = PadicScalar::from_int(p, prec, n).powi(k)?;
            return Ok(FamilyElement::constant(c, prec, m));
        }
        let w = teichmuller(p, prec, n)?.pow(self.tame as u64);
        let log = plog(one_unit_part(p, prec, n)?)?;
        Ok(self.u.scale(log).exp()?.scale(w))
    }

    /// Character product `self * other^c`.
    pub fn combine(&self, other: &Weight, c: i64) -> Weight {
        let u = &self.u + &other.u.mul_int(c as i128);
        let mut w = Weight::new(self.tame as i64 + c * other.tame as i64, u);
        if let (Some(a), Some(b)) = (self.classical, other.classical) {
            w.classical = Some(a + c * b);
        }
        w
    }

    /// `self * [c]`.
    pub fn shift(&self, c: i64) -> Weight {
        self.combine(&Weight::integer(self.p(), self.n(), self.m(), c), 1)
    }

    /// `self * χ` for a tame character.
    pub fn twist(&self, chi: &TameCharacter, c: i64) -> Weight {
        Weight {
            tame: (self.tame as i64 + c * chi.exponent as i64)
                .rem_euclid(tame_order(self.p()) as i64) as u32,
            u: self.u.clone(),
            classical: None,
        }
    }

    /// Specialization at `T = t0`.
    pub fn specialize(&self, t0: PadicScalar) -> Weight {
        let c = self.u.eval(t0);
        let mut w = Weight::new(
            self.tame as i64,
            FamilyElement::constant(c, self.n(), self.m()),
        );
        if self.u.is_constant() {
            w.classical = self.classical;
        }
        w
    }

    /// Whether two weights define the same character to precision.
    pub fn same_character(&self, other: &Weight) -> bool {
        self.tame == other.tame && self.u == other.u
    }

    pub fn to_json(&self) -> WeightJson {
        WeightJson {
            tame: self.tame as i64,
            u: self.u.to_json(),
            p: self.p(),
            n: self.n(),
            m: self.m(),
            classical: self.classical,
        }
    }

    pub fn from_json(j: &WeightJson) -> Result<Self> {
        padic::check_params(j.p, j.n).map_err(|e| Error::Malformed(e.to_string()))?;
        if j.u.len() != j.m {
            return Err(Error::Malformed(format!(
                "weight u has {} coefficients, M={}",
                j.u.len(),
                j.m
            )));
        }
        let u = FamilyElement::from_json(j.p, j.n, &j.u)?;
        let mut w = Weight::new(j.tame, u);
        if let Some(k) = j.classical {
            let expected = Weight::integer(j.p, j.n, j.m, k);
            if !expected.same_character(&w) {
                return Err(Error::Malformed(format!(
                    "classical weight {k} inconsistent with u"
                )));
            }
            w.classical = Some(k);
        }
        Ok(w)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.classical {
            Some(k) => write!(f, "[{k}]"),
            None => write!(f, "ω^{}·exp(({})·log)", self.tame, self.u),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightJson {
    pub tame: i64,
    pub u: Vec<ScalarJson>,
    pub p: u32,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<i64>,
}

/// Decomposition of a pair of weights `k = χ·[a]·v`, `s = χ'·[b]·w` with `v`, `w` strict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Exponent of `χ = ω^(i-a)`.
    pub chi_k: u32,
    /// Exponent of `χ' = ω^(i'-b)`.
    pub chi_s: u32,
    pub a: i64,
    pub b: i64,
    pub chi_even: bool,
    pub a_even_mod_p: bool,
    /// Smallest `α ≥ 0` with `q | a + 2α`.
    pub alpha: i64,
    /// Smallest multiple `β` of `q` with `β - α + b ≥ 0`.
    pub beta: i64,
}

/// `q = p`, or 4 when `p = 2`.
pub fn strict_modulus(p: u32) -> i64 {
    if p == 2 {
        4
    } else {
        p as i64
    }
}

fn integral_part(w: &Weight, name: &str) -> Result<i64> {
    let p = w.p();
    let q = strict_modulus(p);
    let qk = strict_valuation(p) as u32;
    let c0 = w.u().constant_term();
    let r = c0.residue(qk).ok_or_else(|| {
        Error::AssumptionViolated(format!("u_{name} is not integral to precision"))
    })?;
    for (i, c) in w.u().coeffs().iter().enumerate().skip(1) {
        if c.valuation() < strict_valuation(p) {
            return Err(Error::AssumptionViolated(format!(
                "T^{i} coefficient of u_{name} has valuation {} < {}",
                c.valuation(),
                strict_valuation(p)
            )));
        }
    }
    Ok((r as i64).rem_euclid(q))
}

/// Checks the admissibility of `(k, s)` for the fractional connection and reports the
/// integer shifts of the reduction to strict weights.
pub fn check_admissibility(k: &Weight, s: &Weight) -> Result<AssumptionReport> {
    let p = k.p();
    if s.p() != p {
        return Err(Error::ContextMismatch(
            "weights over different primes".into(),
        ));
    }
    let q = strict_modulus(p);
    let order = tame_order(p) as i64;
    let a = integral_part(k, "k")?;
    let b = integral_part(s, "s")?;
    let chi_k = (k.tame() as i64 - a).rem_euclid(order);
    let chi_s = (s.tame() as i64 - b).rem_euclid(order);
    if chi_k % 2 != 0 {
        return Err(Error::OddCharacter(chi_k));
    }
    if p == 2 && a % 2 != 0 {
        return Err(Error::AssumptionViolated(format!(
            "a = {a} is odd for p = 2"
        )));
    }
    let alpha = (0..q)
        .find(|al| (a + 2 * al) % q == 0)
        .ok_or_else(|| Error::AssumptionViolated(format!("no shift α with {q} | {a} + 2α")))?;
    let mut beta = 0;
    while beta - alpha + b < 0 {
        beta += q;
    }
    Ok(AssumptionReport {
        chi_k: chi_k as u32,
        chi_s: chi_s as u32,
        a,
        b,
        chi_even: true,
        a_even_mod_p: p != 2 || a % 2 == 0,
        alpha,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const P: u32 = 5;
    const N: u32 = 10;

    fn fam(xs: &[i128]) -> FamilyElement {
        let c = xs.iter().map(|x| PadicScalar::from_int(P, N, *x)).collect();
        FamilyElement::from_coeffs(P, N, c)
    }

    #[test]
    fn truncated_product() {
        let t = FamilyElement::variable(P, N, 3);
        let t2 = &t * &t;
        assert_eq!(t2, fam(&[0, 0, 1]));
        assert!((&t2 * &t).is_exact_zero());
    }

    #[test]
    fn inverse_of_one_plus_t() {
        let x = fam(&[1, 1, 0, 0]);
        let inv = x.inv().unwrap();
        assert_eq!(inv, fam(&[1, -1, 1, -1]));
        assert!(fam(&[0, 1, 0, 0]).inv().is_err());
    }

    #[test]
    fn integer_weight_evaluation() {
        let k4 = Weight::integer(P, N, 3, 4);
        assert_eq!(k4.eval(3).unwrap(), FamilyElement::from_int(P, N, 3, 81));
        let k0 = Weight::integer(P, N, 3, 0);
        assert_eq!(k0.eval(7).unwrap(), FamilyElement::one(P, N, 3));
        assert!(k4.eval(10).unwrap().is_exact_zero());
        let analytic = Weight::new(4, FamilyElement::from_int(P, N, 3, 4));
        assert_eq!(
            analytic.eval(3).unwrap(),
            FamilyElement::from_int(P, N, 3, 81)
        );
    }

    #[test]
    fn weight_t_at_six() {
        let w = Weight::new(0, FamilyElement::variable(P, N, 2));
        let l = plog(one_unit_part(P, N, 6).unwrap()).unwrap();
        let expected = FamilyElement::from_coeffs(P, N, vec![PadicScalar::one(P, N), l]);
        assert_eq!(w.eval(6).unwrap(), expected);
    }

    #[test]
    fn combine_is_linear() {
        let t = FamilyElement::variable(P, N, 3);
        let k = Weight::new(1, t.clone());
        let s = Weight::new(2, t.mul_int(2));
        let r = k.combine(&s, 2);
        assert_eq!(r.u(), &t.mul_int(5));
        assert_eq!(r.tame(), 1);
        let l = Weight::integer(P, N, 3, 6);
        assert_eq!(
            l.combine(&Weight::integer(P, N, 3, 2), 2).classical(),
            Some(10)
        );
        assert!(k
            .combine(&Weight::integer(P, N, 3, 0), 2)
            .same_character(&k));
    }

    #[test]
    fn assumption_reports() {
        let k4 = Weight::integer(P, N, 2, 4);
        let s1 = Weight::integer(P, N, 2, 1);
        let r = check_admissibility(&k4, &s1).unwrap();
        assert_eq!((r.a, r.b, r.alpha, r.beta), (4, 1, 3, 5));
        assert_eq!(r.chi_k, 0);

        let strict = Weight::new(0, FamilyElement::variable(P, N, 2).mul_int(5));
        let r = check_admissibility(&strict, &strict).unwrap();
        assert_eq!((r.alpha, r.beta), (0, 0));

        let odd = Weight::new(2, FamilyElement::from_int(P, N, 2, 1));
        assert!(matches!(
            check_admissibility(&odd, &s1),
            Err(Error::OddCharacter(1))
        ));

        let bad_t = Weight::new(0, FamilyElement::variable(P, N, 2));
        assert!(matches!(
            check_admissibility(&bad_t, &s1),
            Err(Error::AssumptionViolated(_))
        ));
    }

    #[test]
    fn assumption_two_adic() {
        let k = Weight::integer(2, N, 2, 6);
        let s = Weight::integer(2, N, 2, 3);
        let r = check_admissibility(&k, &s).unwrap();
        assert_eq!((r.a, r.alpha, r.b, r.beta), (2, 1, 3, 0));
        let k3 = Weight::integer(2, N, 2, 3);
        assert!(check_admissibility(&k3, &s).is_err());
    }

    #[test]
    fn strict_weights_give_one_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [2u32, 3, 5, 7] {
            for _ in 0..20 {
                let u = FamilyElement::random(&mut rng, p, 8, 3, strict_valuation(p));
                let w = Weight::new(0, u);
                assert!(w.is_strict());
                let n = loop {
                    let n = rng.gen_range(1..500i128);
                    if n % p as i128 != 0 {
                        break n;
                    }
                };
                let v = w.eval(n).unwrap();
                let c0 = v.constant_term() - PadicScalar::one(p, 8);
                assert!(
                    c0.valuation() >= strict_valuation(p),
                    "p={p} n={n} u={} v={}",
                    w.u(),
                    v
                );
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let w = Weight::new(3, fam(&[5, 25, 0]));
        let j = w.to_json();
        let back =
            Weight::from_json(&serde_json::from_str(&serde_json::to_string(&j).unwrap()).unwrap())
                .unwrap();
        assert!(back.same_character(&w));
        let k = Weight::integer(P, N, 2, 4);
        assert_eq!(
            Weight::from_json(&k.to_json()).unwrap().classical(),
            Some(4)
        );
    }
}
