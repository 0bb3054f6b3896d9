//! Truncated q-expansions with family coefficients, the operators U, V, depletion,
//! derivatives, twists, and generators for Eisenstein series and eta products.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{one_unit_part, plog, teichmuller, PadicScalar, ScalarJson};
use crate::ring::{FamilyElement, TameCharacter, Weight};

/// `a_0 + a_1 q + ... + a_Q q^Q`; coefficients beyond `Q` are unknown.
#[derive(Clone, Debug)]
pub struct QExp {
    p: u32,
    n: u32,
    m: usize,
    coeffs: Vec<FamilyElement>,
}

impl QExp {
    pub fn from_coeffs(coeffs: Vec<FamilyElement>) -> Self {
        assert!(!coeffs.is_empty(), "a q-expansion needs a_0");
        let (p, n, m) = (coeffs[0].p(), coeffs[0].n(), coeffs[0].m());
        QExp { p, n, m, coeffs }
    }

    pub fn zero(p: u32, n: u32, m: usize, q: usize) -> Self {
        Self::from_coeffs(vec![FamilyElement::zero(p, n, m); q + 1])
    }

    /// Embeds scalar coefficients as constant family elements.
    pub fn from_scalars(n: u32, m: usize, xs: &[PadicScalar]) -> Self {
        Self::from_coeffs(
            xs.iter()
                .map(|c| FamilyElement::constant(*c, n, m))
                .collect(),
        )
    }

    pub fn from_ints(p: u32, n: u32, m: usize, xs: &[i128]) -> Self {
        Self::from_coeffs(
            xs.iter()
                .map(|x| FamilyElement::from_int(p, n, m, *x))
                .collect(),
        )
    }

    pub fn from_bigints(p: u32, n: u32, m: usize, xs: &[BigInt]) -> Self {
        Self::from_coeffs(
            xs.iter()
                .map(|x| FamilyElement::constant(PadicScalar::from_bigint(p, n, x), n, m))
                .collect(),
        )
    }

    /// `q^e` known to `q^Q`.
    pub fn monomial(p: u32, n: u32, m: usize, e: usize, q: usize) -> Self {
        let mut f = Self::zero(p, n, m, q);
        if e <= q {
            f.coeffs[e] = FamilyElement::one(p, n, m);
        }
        f
    }

    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        p: u32,
        n: u32,
        m: usize,
        q: usize,
        min_val: i64,
    ) -> Self {
        Self::from_coeffs(
            (0..=q)
                .map(|_| FamilyElement::random(rng, p, n, m, min_val))
                .collect(),
        )
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Highest known index.
    pub fn prec(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[FamilyElement] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> &FamilyElement {
        &self.coeffs[i]
    }

    pub fn truncate(&self, q: usize) -> QExp {
        assert!(
            q <= self.prec(),
            "cannot extend a q-expansion past its precision"
        );
        Self::from_coeffs(self.coeffs[..=q].to_vec())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// `a_n = 0` whenever `p | n`, including `a_0`.
    pub fn is_depleted(&self) -> bool {
        self.coeffs
            .iter()
            .step_by(self.p as usize)
            .all(|c| c.is_zero())
    }

    /// Minimum valuation over all coefficients.
    pub fn valuation(&self) -> i64 {
        self.coeffs.iter().map(|c| c.valuation()).min().unwrap()
    }

    pub fn abs_prec(&self) -> i64 {
        self.coeffs.iter().map(|c| c.abs_prec()).min().unwrap()
    }

    fn map_indexed(&self, f: impl Fn(usize, &FamilyElement) -> FamilyElement) -> QExp {
        Self::from_coeffs(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| f(i, c))
                .collect(),
        )
    }

    pub fn scale(&self, c: PadicScalar) -> QExp {
        self.map_indexed(|_, a| a.scale(c))
    }

    pub fn scale_family(&self, c: &FamilyElement) -> QExp {
        self.map_indexed(|_, a| a * c)
    }

    pub fn mul_int(&self, x: i128) -> QExp {
        self.scale(PadicScalar::from_int(self.p, self.n, x))
    }

    /// Specialization of every coefficient at `T = t0`, kept as constant family elements.
    pub fn specialize(&self, t0: PadicScalar) -> QExp {
        self.map_indexed(|_, a| FamilyElement::constant(a.eval(t0), self.n, self.m))
    }

    pub fn to_json(&self) -> QExpJson {
        QExpJson {
            q: self.prec(),
            coeffs: self.coeffs.iter().map(|c| c.to_json()).collect(),
        }
    }

    pub fn from_json(p: u32, n: u32, j: &QExpJson) -> Result<Self> {
        if j.coeffs.len() != j.q + 1 {
            return Err(Error::Malformed(format!(
                "Q={} but {} coefficients supplied",
                j.q,
                j.coeffs.len()
            )));
        }
        let coeffs: Vec<_> = j
            .coeffs
            .iter()
            .map(|c| FamilyElement::from_json(p, n, c))
            .collect::<Result<_>>()?;
        let m = coeffs[0].m();
        if coeffs.iter().any(|c| c.m() != m) {
            return Err(Error::Malformed(
                "coefficients with different family truncations".into(),
            ));
        }
        Ok(Self::from_coeffs(coeffs))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QExpJson {
    #[serde(rename = "Q")]
    pub q: usize,
    pub coeffs: Vec<Vec<ScalarJson>>,
}

/// Equality on the common prefix of known coefficients.
impl PartialEq for QExp {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.coeffs.iter().zip(&other.coeffs).all(|(a, b)| a == b)
    }
}

impl fmt::Display for QExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut shown = 0;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_exact_zero() {
                continue;
            }
            if shown > 0 {
                write!(f, " + ")?;
            }
            write!(f, "[{c}]q^{i}")?;
            shown += 1;
            if shown == 8 {
                break;
            }
        }
        write!(f, " + O(q^{})", self.prec() + 1)
    }
}

impl<'a> Add<&'a QExp> for &'a QExp {
    type Output = QExp;
    fn add(self, b: &QExp) -> QExp {
        let q = self.prec().min(b.prec());
        QExp::from_coeffs((0..=q).map(|i| &self.coeffs[i] + &b.coeffs[i]).collect())
    }
}

impl<'a> Sub<&'a QExp> for &'a QExp {
    type Output = QExp;
    fn sub(self, b: &QExp) -> QExp {
        let q = self.prec().min(b.prec());
        QExp::from_coeffs((0..=q).map(|i| &self.coeffs[i] - &b.coeffs[i]).collect())
    }
}

impl Neg for &QExp {
    type Output = QExp;
    fn neg(self) -> QExp {
        self.map_indexed(|_, a| -a)
    }
}

/// Cauchy product truncated at the smaller precision.
impl<'a> Mul<&'a QExp> for &'a QExp {
    type Output = QExp;
    fn mul(self, b: &QExp) -> QExp {
        let q = self.prec().min(b.prec());
        let mut out = vec![FamilyElement::zero(self.p, self.n, self.m); q + 1];
        for i in 0..=q {
            let x = &self.coeffs[i];
            if x.is_exact_zero() {
                continue;
            }
            for j in 0..=q - i {
                let y = &b.coeffs[j];
                if !y.is_exact_zero() {
                    out[i + j] = &out[i + j] + &(x * y);
                }
            }
        }
        QExp::from_coeffs(out)
    }
}

impl Add for QExp {
    type Output = QExp;
    fn add(self, b: QExp) -> QExp {
        &self + &b
    }
}

impl Sub for QExp {
    type Output = QExp;
    fn sub(self, b: QExp) -> QExp {
        &self - &b
    }
}

impl Mul for QExp {
    type Output = QExp;
    fn mul(self, b: QExp) -> QExp {
        &self * &b
    }
}

/// `a_n -> a_{np}`; the result is known to `⌊Q/p⌋`.
pub fn u_op(f: &QExp) -> QExp {
    let p = f.p as usize;
    QExp::from_coeffs(
        (0..=f.prec() / p)
            .map(|i| f.coeffs[i * p].clone())
            .collect(),
    )
}

/// `f(q) -> f(q^a)`, kept at the input precision.
pub fn level_raise(f: &QExp, a: usize) -> QExp {
    assert!(a >= 1);
    let mut out = QExp::zero(f.p, f.n, f.m, f.prec());
    for i in 0..=f.prec() / a {
        out.coeffs[i * a] = f.coeffs[i].clone();
    }
    out
}

pub fn v_op(f: &QExp) -> QExp {
    level_raise(f, f.p as usize)
}

/// `f - V U f`: zeroes every coefficient with `p | n`, including `a_0`.
pub fn deplete(f: &QExp) -> QExp {
    let p = f.p as usize;
    f.map_indexed(|i, a| {
        if i % p == 0 {
            FamilyElement::zero(f.p, f.n, f.m)
        } else {
            a.clone()
        }
    })
}

/// `q d/dq`.
pub fn partial(f: &QExp) -> QExp {
    f.map_indexed(|i, a| a.mul_int(i as i128))
}

/// `∂^e` for `e ≥ 0`.
pub fn partial_pow(f: &QExp, e: u32) -> QExp {
    f.map_indexed(|i, a| {
        if e == 0 {
            a.clone()
        } else if i == 0 {
            FamilyElement::zero(f.p, f.n, f.m)
        } else {
            a.scale(PadicScalar::from_int(f.p, f.n, i as i128).pow(e as u64))
        }
    })
}

/// Values `κ(n)` for `0 ≤ n ≤ q`, zero at multiples of `p`.
pub fn weight_table(s: &Weight, q: usize) -> Result<Vec<FamilyElement>> {
    (0..=q).map(|n| s.eval(n as i128)).collect()
}

/// `a_n -> s(n) n^{-j} a_n` on a depleted expansion.
pub fn partial_s(f: &QExp, s: &Weight, j: u32) -> Result<QExp> {
    if !f.is_depleted() {
        return Err(Error::NotDepleted);
    }
    let table = weight_table(s, f.prec())?;
    Ok(partial_s_with(f, &table, j))
}

pub(crate) fn partial_s_with(f: &QExp, table: &[FamilyElement], j: u32) -> QExp {
    let p = f.p as usize;
    f.map_indexed(|i, a| {
        if i % p == 0 || a.is_exact_zero() {
            return FamilyElement::zero(f.p, f.n, f.m);
        }
        let inv = PadicScalar::from_int(f.p, f.n, i as i128)
            .inv()
            .expect("unit index");
        &table[i] * &a.scale(inv.pow(j as u64))
    })
}

/// `a_n -> χ(n) a_n`.
pub fn twist_chi(f: &QExp, chi: &TameCharacter) -> QExp {
    f.map_indexed(|i, a| {
        let c = chi.eval(i as i128, f.n);
        if c.is_exact_zero() {
            FamilyElement::zero(f.p, f.n, f.m)
        } else {
            a.scale(c)
        }
    })
}

/// Eisenstein family with `a_0 = 0` and `a_n = Σ_{d | n, p ∤ d} κ'(d)/d`.
pub fn eisenstein_family(kp: &Weight, q: usize) -> Result<QExp> {
    let (p, n, m) = (kp.p(), kp.n(), kp.m());
    let mut terms = vec![FamilyElement::zero(p, n, m); q + 1];
    for d in 1..=q {
        if d % p as usize == 0 {
            continue;
        }
        let inv_d = PadicScalar::from_int(p, n, d as i128).inv()?;
        terms[d] = kp.eval(d as i128)?.scale(inv_d);
    }
    let mut out = vec![FamilyElement::zero(p, n, m); q + 1];
    for d in 1..=q {
        if terms[d].is_exact_zero() {
            continue;
        }
        for k in (d..=q).step_by(d) {
            out[k] = &out[k] + &terms[d];
        }
    }
    Ok(QExp::from_coeffs(out))
}

/// `Θ.E` at `(κ, κ')`: `a_n = κ(n) Σ_{d | n, p ∤ d} κ'(d)/d` for `p ∤ n`, computed
/// through a single exponential per term.
pub fn theta_eisenstein(k: &Weight, kp: &Weight, q: usize) -> Result<QExp> {
    let (p, n, m) = (k.p(), k.n(), k.m());
    let mut out = vec![FamilyElement::zero(p, n, m); q + 1];
    for idx in 1..=q {
        if idx % p as usize == 0 {
            continue;
        }
        let wn = teichmuller(p, n, idx as i128)?.pow(k.tame() as u64);
        let ln = plog(one_unit_part(p, n, idx as i128)?)?;
        let mut acc = FamilyElement::zero(p, n, m);
        for d in (1..=idx).filter(|d| idx % d == 0) {
            let wd = teichmuller(p, n, d as i128)?.pow(kp.tame() as u64);
            let ld = plog(one_unit_part(p, n, d as i128)?)?;
            let exponent = &k.u().scale(ln) + &kp.u().scale(ld);
            let inv_d = PadicScalar::from_int(p, n, d as i128).inv()?;
            acc = &acc + &exponent.exp()?.scale(wn * wd * inv_d);
        }
        out[idx] = acc;
    }
    Ok(QExp::from_coeffs(out))
}

/// Bernoulli numbers `B_0 … B_k` with `B_1 = -1/2`.
pub fn bernoulli(k: usize) -> Vec<Ratio<BigInt>> {
    let mut b: Vec<Ratio<BigInt>> = Vec::with_capacity(k + 1);
    for m in 0..=k {
        if m == 0 {
            b.push(Ratio::one());
            continue;
        }
        let mut acc = Ratio::<BigInt>::zero();
        let mut binom = BigInt::one();
        for (j, bj) in b.iter().enumerate() {
            acc += Ratio::from_integer(binom.clone()) * bj;
            binom = binom * BigInt::from(m + 1 - j) / BigInt::from(j + 1);
        }
        b.push(-acc / Ratio::from_integer(BigInt::from(m + 1)));
    }
    b
}

/// Classical level-one Eisenstein series `-B_k/2k + Σ σ_{k-1}(n) q^n` with integer
/// higher coefficients, as exact rationals.
pub fn eisenstein_classical_rational(k: usize, q: usize) -> Vec<Ratio<BigInt>> {
    assert!(
        k >= 2 && k.is_multiple_of(2),
        "classical Eisenstein series need even k ≥ 2"
    );
    let bk = bernoulli(k)[k].clone();
    let mut out = vec![Ratio::<BigInt>::zero(); q + 1];
    out[0] = -bk / Ratio::from_integer(BigInt::from(2 * k));
    for d in 1..=q {
        let dk = Ratio::from_integer(BigInt::from(d).pow(k as u32 - 1));
        for n in (d..=q).step_by(d) {
            out[n] += &dk;
        }
    }
    out
}

pub fn rational_to_scalar(p: u32, n: u32, x: &Ratio<BigInt>) -> Result<PadicScalar> {
    PadicScalar::from_bigint(p, n, x.numer()).try_div(PadicScalar::from_bigint(p, n, x.denom()))
}

pub fn eisenstein_classical(p: u32, n: u32, m: usize, k: usize, q: usize) -> Result<QExp> {
    let xs = eisenstein_classical_rational(k, q)
        .iter()
        .map(|x| rational_to_scalar(p, n, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(QExp::from_scalars(n, m, &xs))
}

/// Integer coefficients of `Π_(a,e) η(aτ)^e` up to `q^Q`.
pub fn eta_product_integers(factors: &[(usize, i64)], q: usize) -> Result<Vec<BigInt>> {
    let weight24: i64 = factors.iter().map(|(a, e)| *a as i64 * e).sum();
    if weight24 % 24 != 0 || weight24 < 0 {
        return Err(Error::InvalidInput(format!(
            "eta quotient has q-order {weight24}/24, not a nonnegative integer"
        )));
    }
    let shift = (weight24 / 24) as usize;
    let mut c = vec![BigInt::zero(); q + 1];
    if shift > q {
        return Ok(c);
    }
    let len = q - shift;
    c[0] = BigInt::one();
    for &(a, e) in factors {
        for step in (a..=len).step_by(a) {
            for _ in 0..e.unsigned_abs() {
                if e > 0 {
                    for k in (step..=len).rev() {
                        let t = c[k - step].clone();
                        c[k] -= t;
                    }
                } else {
                    for k in step..=len {
                        let t = c[k - step].clone();
                        c[k] += t;
                    }
                }
            }
        }
    }
    let mut out = vec![BigInt::zero(); q + 1];
    for k in 0..=len {
        out[k + shift] = c[k].clone();
    }
    Ok(out)
}

pub fn eta_product(p: u32, n: u32, m: usize, factors: &[(usize, i64)], q: usize) -> Result<QExp> {
    Ok(QExp::from_bigints(
        p,
        n,
        m,
        &eta_product_integers(factors, q)?,
    ))
}

/// The discriminant form `q Π (1 - q^n)^24`.
pub fn delta_form(p: u32, n: u32, m: usize, q: usize) -> QExp {
    eta_product(p, n, m, &[(1, 24)], q).expect("valid eta product")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const N: u32 = 10;

    fn ints(p: u32, xs: &[i128]) -> QExp {
        QExp::from_ints(p, N, 2, xs)
    }

    fn sigma(k: u32, n: u64) -> i128 {
        (1..=n)
            .filter(|d| n.is_multiple_of(*d))
            .map(|d| (d as i128).pow(k))
            .sum()
    }

    #[test]
    fn u_on_identity_sequence() {
        let f = ints(2, &(0..=10).collect::<Vec<_>>());
        let g = u_op(&f);
        assert_eq!(g.prec(), 5);
        assert_eq!(g, ints(2, &[0, 2, 4, 6, 8, 10]));
        assert!(u_op(&QExp::monomial(5, N, 2, 1, 20)).is_zero());
    }

    #[test]
    fn v_moves_coefficients() {
        let q = QExp::monomial(5, N, 2, 1, 20);
        assert_eq!(v_op(&q), QExp::monomial(5, N, 2, 5, 20));
        let one = QExp::monomial(5, N, 2, 0, 20);
        assert_eq!(v_op(&one), one);
        assert_eq!(
            level_raise(&QExp::monomial(5, N, 2, 1, 20), 3),
            QExp::monomial(5, N, 2, 3, 20)
        );
    }

    #[test]
    fn depleted_sigma_three() {
        let f = ints(
            2,
            &(0..=8)
                .map(|n| if n == 0 { 0 } else { sigma(3, n as u64) })
                .collect::<Vec<_>>(),
        );
        let d = deplete(&f);
        assert_eq!(d.truncate(4), ints(2, &[0, 1, 0, 28, 0]));
        assert!(u_op(&d).is_zero());
        assert_eq!(deplete(&d), d);
    }

    #[test]
    fn partial_and_leibniz() {
        let q3 = QExp::monomial(5, N, 2, 3, 10);
        assert_eq!(partial(&q3), q3.mul_int(3));
        assert!(partial(&QExp::monomial(5, N, 2, 0, 10)).is_zero());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = QExp::random(&mut rng, 5, N, 3, 30, 0);
        let g = QExp::random(&mut rng, 5, N, 3, 30, 0);
        assert_eq!(
            partial(&(&f * &g)),
            &(&partial(&f) * &g) + &(&f * &partial(&g))
        );
    }

    #[test]
    fn partial_s_examples() {
        let f = deplete(&ints(5, &[0, 1, 1, 7, 1, 1, 1]));
        let s2 = Weight::integer(5, N, 2, 2);
        assert_eq!(
            partial_s(&f, &s2, 0).unwrap().coeff(3),
            &FamilyElement::from_int(5, N, 2, 63)
        );
        let s0 = Weight::integer(5, N, 2, 0);
        let r = partial_s(&f, &s0, 1).unwrap();
        assert_eq!(
            r.coeff(3).constant_term(),
            PadicScalar::from_ratio(5, N, 7, 3).unwrap()
        );
        assert!(matches!(
            partial_s(&ints(5, &[0, 1, 1, 1, 1, 1]), &s0, 0),
            Err(Error::NotDepleted)
        ));

        let st = Weight::new(0, FamilyElement::variable(5, N, 2));
        let r = partial_s(&f, &st, 0).unwrap();
        let l = plog(one_unit_part(5, N, 3).unwrap()).unwrap();
        let seven = PadicScalar::from_int(5, N, 7);
        let expected = FamilyElement::from_coeffs(5, N, vec![seven, seven * l]);
        assert_eq!(r.coeff(3), &expected);
    }

    #[test]
    fn quadratic_twist_mod_five() {
        let f = ints(5, &[0, 1, 1, 0]);
        let chi = TameCharacter::new(5, 2);
        assert_eq!(twist_chi(&f, &chi), ints(5, &[0, 1, -1, 0]));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = QExp::random(&mut rng, 5, N, 2, 40, 0);
        assert_eq!(twist_chi(&twist_chi(&g, &chi), &chi), deplete(&g));
        assert_eq!(twist_chi(&g, &TameCharacter::trivial(5)), deplete(&g));
    }

    #[test]
    fn eisenstein_family_values() {
        let e = eisenstein_family(&Weight::integer(5, N, 2, 4), 30).unwrap();
        assert_eq!(e.coeff(6), &FamilyElement::from_int(5, N, 2, 252));
        assert!(e.coeff(0).is_exact_zero());
        let e2 = eisenstein_family(&Weight::integer(2, N, 2, 4), 30).unwrap();
        assert_eq!(e2.coeff(2), &FamilyElement::from_int(2, N, 2, 1));
        assert_eq!(u_op(&e), e.truncate(6));
    }

    #[test]
    fn theta_eisenstein_basics() {
        let kp = Weight::integer(5, N, 2, 4);
        let t0 = theta_eisenstein(&Weight::integer(5, N, 2, 0), &kp, 40).unwrap();
        assert_eq!(t0, deplete(&eisenstein_family(&kp, 40).unwrap()));
        let fam = Weight::new(1, FamilyElement::variable(5, N, 2).mul_int(5));
        let t = theta_eisenstein(&fam, &kp, 10).unwrap();
        assert_eq!(t.coeff(1), &FamilyElement::one(5, N, 2));
    }

    #[test]
    fn delta_coefficients() {
        let d = eta_product_integers(&[(1, 24)], 12).unwrap();
        let expected = [
            0, 1, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643, -115920, 534612, -370944,
        ];
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(d[i], BigInt::from(*e), "tau({i})");
        }
    }

    #[test]
    fn classical_eisenstein_square() {
        let e4 = eisenstein_classical_rational(4, 30);
        let e8 = eisenstein_classical_rational(8, 30);
        assert_eq!(e4[0], Ratio::new(BigInt::from(1), BigInt::from(240)));
        let mut sq = vec![Ratio::<BigInt>::zero(); 31];
        for i in 0..=30 {
            for j in 0..=30 - i {
                sq[i + j] += &e4[i] * &e4[j];
            }
        }
        let scale = Ratio::new(BigInt::from(1), BigInt::from(120));
        for i in 0..=30 {
            assert_eq!(sq[i], &e8[i] * &scale);
        }
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = QExp::random(&mut rng, 3, N, 3, 12, -2);
        let j = serde_json::to_string(&f.to_json()).unwrap();
        let back = QExp::from_json(3, N, &serde_json::from_str(&j).unwrap()).unwrap();
        assert_eq!(back, f);
        assert_eq!(serde_json::to_string(&back.to_json()).unwrap(), j);
    }
}
