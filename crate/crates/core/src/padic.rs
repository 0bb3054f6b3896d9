//! Fixed relative precision p-adic scalars and the special functions built on them.
//!
//! A nonzero [`PadicScalar`] stores `p^v * u` with `u` a unit known modulo `p^N`.
//! A zero stores only the absolute precision it is known to, or is exact.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Valuation used for an exact zero.
pub const INFINITE_VALUATION: i64 = i64::MAX;

/// Largest supported `p^N`: products of two residues must fit in `u128`.
const MODULUS_LIMIT: u128 = 1 << 63;

#[derive(Clone, Copy, Debug)]
pub struct PadicScalar {
    p: u32,
    val: i64,
    unit: u64,
    prec: u32,
}

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d.saturating_mul(d) <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// `p^e` as `u64`, panicking past the supported modulus.
pub fn ppow(p: u32, e: u32) -> u64 {
    let mut r: u128 = 1;
    for _ in 0..e {
        r *= p as u128;
        assert!(
            r < MODULUS_LIMIT,
            "p^{e} exceeds the supported modulus for p={p}"
        );
    }
    r as u64
}

/// Largest `N` with `p^N` inside the supported modulus.
pub fn max_precision(p: u32) -> u32 {
    let mut n = 0;
    let mut r: u128 = 1;
    while r * (p as u128) < MODULUS_LIMIT {
        r *= p as u128;
        n += 1;
    }
    n
}

/// Validates a `(p, N)` pair.
pub fn check_params(p: u32, n: u32) -> Result<()> {
    if !is_prime(p) {
        return Err(Error::InvalidInput(format!("{p} is not prime")));
    }
    if n == 0 || n > max_precision(p) {
        return Err(Error::InvalidInput(format!(
            "precision {n} unsupported for p={p} (1..={})",
            max_precision(p)
        )));
    }
    Ok(())
}

/// p-adic valuation of a nonzero integer.
pub fn int_valuation(p: u32, mut n: i128) -> u32 {
    assert!(n != 0);
    let mut v = 0;
    while n % p as i128 == 0 {
        n /= p as i128;
        v += 1;
    }
    v
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn powmod(mut a: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    a %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, a, m);
        }
        a = mulmod(a, a, m);
        e >>= 1;
    }
    r
}

/// Inverse of a unit modulo `m` by the extended Euclidean algorithm.
pub fn inv_mod(a: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    assert_eq!(r0, 1, "{a} is not invertible modulo {m}");
    s0.rem_euclid(m as i128) as u64
}

impl PadicScalar {
    /// Builds `p^val * raw` where `raw` is known modulo `p^k`, stripping p-factors from `raw`.
    fn normalize(p: u32, val: i64, raw: u64, k: u32) -> Self {
        if raw == 0 {
            return Self::zero_to(p, val.saturating_add(k as i64));
        }
        let mut raw = raw;
        let mut e = 0;
        while raw.is_multiple_of(p as u64) {
            raw /= p as u64;
            e += 1;
        }
        let prec = k - e;
        PadicScalar {
            p,
            val: val + e as i64,
            unit: raw % ppow(p, prec),
            prec,
        }
    }

    pub fn zero(p: u32) -> Self {
        PadicScalar {
            p,
            val: INFINITE_VALUATION,
            unit: 0,
            prec: 0,
        }
    }

    /// A zero known modulo `p^abs`.
    pub fn zero_to(p: u32, abs: i64) -> Self {
        PadicScalar {
            p,
            val: abs,
            unit: 0,
            prec: 0,
        }
    }

    pub fn one(p: u32, n: u32) -> Self {
        Self::from_int(p, n, 1)
    }

    pub fn from_int(p: u32, n: u32, x: i128) -> Self {
        if x == 0 {
            return Self::zero(p);
        }
        let v = int_valuation(p, x);
        let m = ppow(p, n);
        let unit = (x / (p as i128).pow(v)).rem_euclid(m as i128) as u64;
        PadicScalar {
            p,
            val: v as i64,
            unit,
            prec: n,
        }
    }

    pub fn from_bigint(p: u32, n: u32, x: &BigInt) -> Self {
        if x.is_zero() {
            return Self::zero(p);
        }
        let pb = BigInt::from(p);
        let mut x = x.clone();
        let mut v = 0i64;
        while (&x % &pb).is_zero() {
            x /= &pb;
            v += 1;
        }
        let m = BigInt::from(ppow(p, n));
        let r = ((x % &m) + &m) % &m;
        PadicScalar {
            p,
            val: v,
            unit: r.to_u64().expect("residue fits"),
            prec: n,
        }
    }

    /// `num / den` at relative precision `n`.
    pub fn from_ratio(p: u32, n: u32, num: i128, den: i128) -> Result<Self> {
        Self::from_int(p, n, num).try_div(Self::from_int(p, n, den))
    }

    pub fn from_rational(p: u32, n: u32, r: &Ratio<i128>) -> Result<Self> {
        Self::from_ratio(p, n, *r.numer(), *r.denom())
    }

    /// Builds `p^val * unit` known to relative precision `prec`.
    pub fn from_parts(p: u32, val: i64, unit: u64, prec: u32) -> Result<Self> {
        if unit == 0 || prec == 0 {
            return Ok(Self::zero_to(p, val));
        }
        if unit.is_multiple_of(p as u64) {
            return Err(Error::InvalidInput(format!("unit {unit} divisible by {p}")));
        }
        Ok(PadicScalar {
            p,
            val,
            unit: unit % ppow(p, prec),
            prec,
        })
    }

    /// `p^e` at relative precision `n`.
    pub fn p_power(p: u32, n: u32, e: i64) -> Self {
        PadicScalar {
            p,
            val: e,
            unit: 1 % ppow(p, n),
            prec: n,
        }
    }

    /// Uniform random scalar with valuation at least `min_val`, zero with small probability.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, p: u32, n: u32, min_val: i64) -> Self {
        let m = ppow(p, n);
        let raw = rng.gen_range(0..m);
        Self::normalize(p, min_val, raw, n)
    }

    /// Random unit at relative precision `n`.
    pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, p: u32, n: u32) -> Self {
        let m = ppow(p, n);
        loop {
            let raw = rng.gen_range(1..m);
            if raw % p as u64 != 0 {
                return PadicScalar {
                    p,
                    val: 0,
                    unit: raw,
                    prec: n,
                };
            }
        }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn is_zero(&self) -> bool {
        self.unit == 0
    }

    pub fn is_exact_zero(&self) -> bool {
        self.unit == 0 && self.val == INFINITE_VALUATION
    }

    /// Valuation; for a zero this is its absolute precision.
    pub fn valuation(&self) -> i64 {
        self.val
    }

    pub fn unit(&self) -> u64 {
        self.unit
    }

    pub fn rel_prec(&self) -> u32 {
        self.prec
    }

    /// The exponent `k` such that the value is known modulo `p^k`.
    pub fn abs_prec(&self) -> i64 {
        if self.is_zero() {
            self.val
        } else {
            self.val + self.prec as i64
        }
    }

    pub fn is_unit(&self) -> bool {
        !self.is_zero() && self.val == 0
    }

    /// Drops absolute precision to at most `p^abs`.
    pub fn reduce_abs(&self, abs: i64) -> Self {
        if abs >= self.abs_prec() {
            return *self;
        }
        if self.is_zero() || abs <= self.val {
            return Self::zero_to(self.p, abs);
        }
        let prec = (abs - self.val) as u32;
        PadicScalar {
            p: self.p,
            val: self.val,
            unit: self.unit % ppow(self.p, prec),
            prec,
        }
    }

    /// Drops relative precision to at most `n`.
    pub fn reduce_rel(&self, n: u32) -> Self {
        if self.is_zero() || n >= self.prec {
            return *self;
        }
        PadicScalar {
            p: self.p,
            val: self.val,
            unit: self.unit % ppow(self.p, n),
            prec: n,
        }
    }

    /// Treats the stored representative as known to relative precision `w`; inexact
    /// zeros become exact.
    pub fn lift(&self, w: u32) -> Self {
        if self.is_zero() {
            return Self::zero(self.p);
        }
        if w <= self.prec {
            return *self;
        }
        PadicScalar { prec: w, ..*self }
    }

    /// Residue modulo `p^k` when the value is integral and known that far.
    pub fn residue(&self, k: u32) -> Option<u64> {
        if self.abs_prec() < k as i64 {
            return None;
        }
        if self.is_zero() || self.val >= k as i64 {
            return Some(0);
        }
        if self.val < 0 {
            return None;
        }
        let m = ppow(self.p, k) as u128;
        Some(((self.unit as u128 * ppow(self.p, self.val as u32) as u128) % m) as u64)
    }

    /// Whether the value agrees with the integer `x` modulo `p^k`.
    pub fn congruent_int(&self, x: i128, k: u32) -> bool {
        let m = ppow(self.p, k) as i128;
        self.residue(k) == Some(x.rem_euclid(m) as u64)
    }

    /// Balanced integer representative, when the value is integral and known to at least one digit.
    pub fn to_integer(&self) -> Option<i128> {
        if self.is_exact_zero() {
            return Some(0);
        }
        let k = u32::try_from(self.abs_prec()).ok()?;
        let r = self.residue(k)? as i128;
        let m = ppow(self.p, k) as i128;
        Some(if r > m / 2 { r - m } else { r })
    }

    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::PrecisionExhaustedDivisor);
        }
        let m = ppow(self.p, self.prec);
        Ok(PadicScalar {
            p: self.p,
            val: -self.val,
            unit: inv_mod(self.unit, m),
            prec: self.prec,
        })
    }

    pub fn try_div(&self, other: Self) -> Result<Self> {
        Ok(*self * other.inv()?)
    }

    pub fn pow(&self, e: u64) -> Self {
        if e == 0 {
            return Self::one(self.p, self.prec.max(1)).with_prec_of(self);
        }
        if self.is_zero() {
            if self.is_exact_zero() {
                return *self;
            }
            return Self::zero_to(self.p, self.val.saturating_mul(e as i64));
        }
        let m = ppow(self.p, self.prec);
        PadicScalar {
            p: self.p,
            val: self.val * e as i64,
            unit: powmod(self.unit, e, m),
            prec: self.prec,
        }
    }

    fn with_prec_of(self, other: &Self) -> Self {
        if other.is_zero() {
            self
        } else {
            self.reduce_rel(other.prec)
        }
    }

    /// Integer powers, negative exponents by inversion.
    pub fn powi(&self, e: i64) -> Result<Self> {
        if e >= 0 {
            Ok(self.pow(e as u64))
        } else {
            Ok(self.inv()?.pow(e.unsigned_abs()))
        }
    }

    pub fn mul_int(&self, x: i128) -> Self {
        let n = if self.is_zero() {
            max_precision(self.p)
        } else {
            self.prec
        };
        *self * Self::from_int(self.p, n, x)
    }

    /// Multiplication by `p^e`.
    pub fn shift(&self, e: i64) -> Self {
        if self.is_exact_zero() {
            return *self;
        }
        PadicScalar {
            val: self.val + e,
            ..*self
        }
    }

    pub fn serialize_repr(&self) -> ScalarJson {
        ScalarJson {
            v: if self.is_exact_zero() {
                ValuationJson::Inf(InfTag::Inf)
            } else {
                ValuationJson::Finite(self.val)
            },
            u: self.unit.to_string(),
            n: self.prec,
        }
    }

    pub fn from_repr(p: u32, repr: &ScalarJson) -> Result<Self> {
        let unit: u64 = repr.u.parse().map_err(|_| {
            Error::Malformed(format!(
                "unit residue {:?} is not a decimal integer",
                repr.u
            ))
        })?;
        match repr.v {
            ValuationJson::Inf(_) => {
                if unit != 0 {
                    return Err(Error::Malformed("exact zero with nonzero unit".into()));
                }
                Ok(Self::zero(p))
            }
            ValuationJson::Finite(v) => {
                if unit != 0 && (repr.n == 0 || repr.n > max_precision(p)) {
                    return Err(Error::Malformed(format!(
                        "relative precision {} out of range",
                        repr.n
                    )));
                }
                if unit != 0 && unit >= ppow(p, repr.n) {
                    return Err(Error::Malformed(format!("unit {unit} exceeds p^N")));
                }
                Self::from_parts(p, v, unit, repr.n).map_err(|e| Error::Malformed(e.to_string()))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfTag {
    Inf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValuationJson {
    Finite(i64),
    Inf(InfTag),
}

/// Wire form of a scalar; the prime is supplied by the enclosing object.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarJson {
    pub v: ValuationJson,
    pub u: String,
    #[serde(rename = "N")]
    pub n: u32,
}

impl PartialEq for PadicScalar {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && (*self - *other).is_zero()
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exact_zero() {
            return write!(f, "0");
        }
        if self.is_zero() {
            return write!(f, "O({}^{})", self.p, self.val);
        }
        if self.val == 0 {
            write!(f, "{} + O({}^{})", self.unit, self.p, self.abs_prec())
        } else {
            write!(
                f,
                "{}*{}^{} + O({}^{})",
                self.unit,
                self.p,
                self.val,
                self.p,
                self.abs_prec()
            )
        }
    }
}

impl Add for PadicScalar {
    type Output = PadicScalar;
    fn add(self, b: PadicScalar) -> PadicScalar {
        debug_assert_eq!(self.p, b.p, "mixed primes");
        let p = self.p;
        let abs = self.abs_prec().min(b.abs_prec());
        if self.is_zero() && b.is_zero() {
            return if abs == INFINITE_VALUATION {
                Self::zero(p)
            } else {
                Self::zero_to(p, abs)
            };
        }
        let v = match (self.is_zero(), b.is_zero()) {
            (true, _) => b.val,
            (_, true) => self.val,
            _ => self.val.min(b.val),
        };
        if v >= abs {
            return Self::zero_to(p, abs);
        }
        let k = (abs - v) as u32;
        let m = ppow(p, k);
        let term = |x: &PadicScalar| -> u64 {
            if x.is_zero() || x.val - v >= k as i64 {
                0
            } else {
                mulmod(x.unit % m, ppow(p, (x.val - v) as u32), m)
            }
        };
        let raw = (term(&self) as u128 + term(&b) as u128) % m as u128;
        Self::normalize(p, v, raw as u64, k)
    }
}

impl Neg for PadicScalar {
    type Output = PadicScalar;
    fn neg(self) -> PadicScalar {
        if self.is_zero() {
            return self;
        }
        let m = ppow(self.p, self.prec);
        PadicScalar {
            unit: m - self.unit,
            ..self
        }
    }
}

impl Sub for PadicScalar {
    type Output = PadicScalar;
    fn sub(self, b: PadicScalar) -> PadicScalar {
        self + (-b)
    }
}

impl Mul for PadicScalar {
    type Output = PadicScalar;
    fn mul(self, b: PadicScalar) -> PadicScalar {
        debug_assert_eq!(self.p, b.p, "mixed primes");
        let p = self.p;
        if self.is_exact_zero() || b.is_exact_zero() {
            return Self::zero(p);
        }
        match (self.is_zero(), b.is_zero()) {
            (true, _) | (_, true) => Self::zero_to(p, self.val.saturating_add(b.val)),
            (false, false) => {
                let prec = self.prec.min(b.prec);
                let m = ppow(p, prec);
                PadicScalar {
                    p,
                    val: self.val.saturating_add(b.val),
                    unit: mulmod(self.unit, b.unit, m),
                    prec,
                }
            }
        }
    }
}

impl AddAssign for PadicScalar {
    fn add_assign(&mut self, b: PadicScalar) {
        *self = *self + b;
    }
}

impl SubAssign for PadicScalar {
    fn sub_assign(&mut self, b: PadicScalar) {
        *self = *self - b;
    }
}

impl MulAssign for PadicScalar {
    fn mul_assign(&mut self, b: PadicScalar) {
        *self = *self * b;
    }
}

/// Commutative rings of p-adic quantities that the generic special functions act on.
pub trait PadicAlgebra:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn prime(&self) -> u32;
    fn one_like(&self) -> Self;
    fn scale(&self, c: PadicScalar) -> Self;
    fn min_valuation(&self) -> i64;

    /// Relative precision available for building constants next to `self`.
    fn working_precision(&self) -> u32;

    fn int_like(&self, x: i128) -> Self {
        self.one_like().scale(PadicScalar::from_int(
            self.prime(),
            self.working_precision(),
            x,
        ))
    }
}

impl PadicAlgebra for PadicScalar {
    fn prime(&self) -> u32 {
        self.p
    }
    fn one_like(&self) -> Self {
        PadicScalar::one(self.p, self.working_precision())
    }
    fn scale(&self, c: PadicScalar) -> Self {
        *self * c
    }
    fn min_valuation(&self) -> i64 {
        self.val
    }
    fn working_precision(&self) -> u32 {
        if self.is_zero() {
            max_precision(self.p)
        } else {
            self.prec
        }
    }
}

/// Exponent of the tame character group: `p - 1`, or 2 on `(Z/4)^*` when `p = 2`.
pub fn tame_order(p: u32) -> u32 {
    if p == 2 {
        2
    } else {
        p - 1
    }
}

/// The 1-unit domain starts at valuation 1, or 2 when `p = 2`.
pub fn strict_valuation(p: u32) -> i64 {
    if p == 2 {
        2
    } else {
        1
    }
}

/// Teichmüller representative of `n` at relative precision `prec`.
pub fn teichmuller(p: u32, prec: u32, n: i128) -> Result<PadicScalar> {
    if n.rem_euclid(p as i128) == 0 {
        return Err(Error::NonUnitArgument(n));
    }
    if p == 2 {
        let sign = if n.rem_euclid(4) == 1 { 1 } else { -1 };
        return Ok(PadicScalar::from_int(p, prec, sign));
    }
    let m = ppow(p, prec);
    let mut x = n.rem_euclid(m as i128) as u64;
    loop {
        let y = powmod(x, p as u64, m);
        if y == x {
            break;
        }
        x = y;
    }
    Ok(PadicScalar {
        p,
        val: 0,
        unit: x,
        prec,
    })
}

/// The 1-unit part `n / ω(n)`.
pub fn one_unit_part(p: u32, prec: u32, n: i128) -> Result<PadicScalar> {
    let w = teichmuller(p, prec, n)?;
    PadicScalar::from_int(p, prec, n).try_div(w)
}

/// `⌊log_p m⌋` for `m ≥ 1`.
fn ilog(p: u32, m: u64) -> i64 {
    m.ilog(p as u64) as i64
}

/// p-adic logarithm of a 1-unit.
pub fn plog(x: PadicScalar) -> Result<PadicScalar> {
    let p = x.p;
    if x.is_zero() || x.val != 0 {
        return Err(Error::NotOneUnit);
    }
    let one = PadicScalar::one(p, x.prec);
    let y = x - one;
    if y.is_exact_zero() {
        return Ok(PadicScalar::zero(p));
    }
    if y.val < strict_valuation(p) {
        return Err(Error::NotOneUnit);
    }
    let target = x.abs_prec();
    let v = y.val;
    let mut sum = PadicScalar::zero(p);
    let mut power = y;
    let mut m: u64 = 1;
    while m as i64 * v - ilog(p, m) < target {
        let term = power.try_div(PadicScalar::from_int(p, x.prec, m as i128))?;
        if m % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
        power *= y;
        m += 1;
    }
    Ok(sum.reduce_abs(target))
}

/// Number of terms of the exponential series needed for absolute precision `target`
/// on an argument of valuation `v`.
pub fn exp_terms(p: u32, v: i64, target: i64) -> u64 {
    let mut m: u64 = 1;
    while m as i64 * v - ((m as i64 - 1) / (p as i64 - 1)) < target {
        m += 1;
    }
    m
}

/// p-adic exponential, defined for `v(x) ≥ 1` (`≥ 2` when `p = 2`).
pub fn pexp(x: PadicScalar) -> Result<PadicScalar> {
    let p = x.p;
    if x.is_exact_zero() {
        return Ok(PadicScalar::one(p, max_precision(p)));
    }
    if x.val < strict_valuation(p) {
        return Err(Error::ExpDivergent);
    }
    let target = x.abs_prec().min(max_precision(p) as i64);
    let prec = target as u32;
    let one = PadicScalar::one(p, prec);
    if x.is_zero() {
        return Ok(one);
    }
    let terms = exp_terms(p, x.val, target);
    let mut sum = one;
    let mut term = one;
    for m in 1..terms {
        term = (term * x).try_div(PadicScalar::from_int(p, prec, m as i128))?;
        sum += term;
    }
    Ok(sum.reduce_abs(target))
}

/// `1/j!` at relative precision `n`.
pub fn inv_factorial(p: u32, n: u32, j: u64) -> PadicScalar {
    let mut r = PadicScalar::one(p, n);
    for i in 2..=j {
        r = r
            .try_div(PadicScalar::from_int(p, n, i as i128))
            .expect("nonzero integer");
    }
    r
}

/// Generalized binomial coefficient `u(u-1)...(u-j+1)/j!`.
pub fn binomial<R: PadicAlgebra>(u: &R, j: u64) -> R {
    let mut acc = u.one_like();
    for i in 0..j {
        acc = acc * (u.clone() - u.int_like(i as i128));
    }
    acc.scale(inv_factorial(u.prime(), u.working_precision(), j))
}

/// Square root with residue in `[1, p/2]` (residue 1 mod 4 when `p = 2`).
pub fn hensel_sqrt(a: PadicScalar) -> Result<PadicScalar> {
    let p = a.p;
    if a.is_exact_zero() {
        return Ok(a);
    }
    if a.is_zero() {
        return Ok(PadicScalar::zero_to(p, a.val.div_euclid(2)));
    }
    if a.val % 2 != 0 {
        return Err(Error::NoSquareRoot);
    }
    let half = a.val / 2;
    let n = a.prec;
    let u = a.unit;
    if p == 2 {
        if u % 8 != 1 && n >= 3 {
            return Err(Error::NoSquareRoot);
        }
        if n < 3 {
            if u % (1 << n) != 1 % (1 << n) {
                return Err(Error::NoSquareRoot);
            }
            return PadicScalar::from_parts(2, half, 1, n.saturating_sub(1).max(1));
        }
        // r^2 = u mod 2^(i+1) lifted bit by bit; the root is determined mod 2^(n-1).
        let m = ppow(2, n);
        let mut r: u64 = 1;
        for i in 3..n {
            if mulmod(r, r, m) % (1 << (i + 1)) != u % (1 << (i + 1)) {
                r += 1 << (i - 1);
            }
        }
        let prec = n - 1;
        let r = r % ppow(2, prec);
        let r = if r % 4 == 1 { r } else { ppow(2, prec) - r };
        return Ok(PadicScalar {
            p,
            val: half,
            unit: r,
            prec,
        });
    }
    let m = ppow(p, n);
    let u1 = u % p as u64;
    let r0 = (1..p as u64)
        .find(|x| x * x % p as u64 == u1)
        .ok_or(Error::NoSquareRoot)?;
    let r0 = r0.min(p as u64 - r0);
    let mut r = r0;
    let inv2 = inv_mod(2, m);
    for _ in 0..=n.ilog2() + 1 {
        // Newton step r <- (r + u/r)/2.
        let q = mulmod(u, inv_mod(r, m), m);
        r = mulmod((r + q) % m, inv2, m);
    }
    debug_assert_eq!(mulmod(r, r, m), u % m);
    Ok(PadicScalar {
        p,
        val: half,
        unit: r,
        prec: n,
    })
}

/// Orders scalars by valuation, then by unit residue; used for deterministic root ordering.
pub fn canonical_cmp(a: &PadicScalar, b: &PadicScalar) -> Ordering {
    a.val.cmp(&b.val).then(a.unit.cmp(&b.unit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(p: u32, n: u32, x: i128) -> PadicScalar {
        PadicScalar::from_int(p, n, x)
    }

    #[test]
    fn sum_of_units_gains_valuation() {
        let r = s(5, 6, 2) + s(5, 6, 3);
        assert_eq!(r.valuation(), 1);
        assert_eq!(r.unit(), 1);
        assert_eq!(r.rel_prec(), 5);
    }

    #[test]
    fn division_of_equal_values() {
        let five = s(5, 6, 5);
        let r = five.try_div(five).unwrap();
        assert_eq!(r.valuation(), 0);
        assert_eq!(r.unit(), 1);
    }

    #[test]
    fn inverse_of_two_mod_125() {
        let r = s(5, 3, 1).try_div(s(5, 3, 2)).unwrap();
        assert_eq!(r.unit(), 63);
    }

    #[test]
    fn divide_by_zero_reports() {
        let z = s(5, 3, 7) - s(5, 3, 7);
        assert!(matches!(
            s(5, 3, 1).try_div(z),
            Err(Error::PrecisionExhaustedDivisor)
        ));
    }

    #[test]
    fn cancellation_reduces_precision() {
        let a = s(5, 4, 1);
        let b = s(5, 4, 26);
        let d = b - a;
        assert_eq!(d.valuation(), 2);
        assert_eq!(d.rel_prec(), 2);
        assert_eq!(d.abs_prec(), 4);
    }

    #[test]
    fn teichmuller_values() {
        assert!(teichmuller(5, 2, 2).unwrap().congruent_int(7, 2));
        assert!(teichmuller(5, 6, 1).unwrap().congruent_int(1, 6));
        assert!(teichmuller(5, 6, 6).unwrap().congruent_int(1, 6));
        assert!(teichmuller(2, 10, 3).unwrap().congruent_int(-1, 10));
        assert!(matches!(
            teichmuller(5, 4, 10),
            Err(Error::NonUnitArgument(10))
        ));
    }

    #[test]
    fn teichmuller_is_root_of_unity() {
        for p in [3u32, 5, 7, 11] {
            for n in 1..30 {
                if n % p as i128 == 0 {
                    continue;
                }
                let w = teichmuller(p, 8, n).unwrap();
                assert!(w.pow((p - 1) as u64).congruent_int(1, 8));
                let one = one_unit_part(p, 8, n).unwrap();
                assert_eq!(w * one, s(p, 8, n));
            }
        }
    }

    #[test]
    fn one_unit_part_of_two() {
        assert!(one_unit_part(5, 2, 2).unwrap().congruent_int(11, 2));
        assert_eq!(one_unit_part(5, 6, 1).unwrap(), s(5, 6, 1));
    }

    #[test]
    fn plog_of_six_mod_125() {
        let l = plog(s(5, 3, 6)).unwrap();
        assert!(l.congruent_int(55, 3), "{l}");
        assert!(plog(s(5, 3, 1)).unwrap().is_zero());
        assert!(matches!(plog(s(5, 3, 2)), Err(Error::NotOneUnit)));
        assert!(matches!(plog(s(2, 8, 3)), Err(Error::NotOneUnit)));
    }

    #[test]
    fn pexp_of_five_mod_125() {
        // Direct partial sums of x^m/m! at x = 5 reduce to 1 + 5 + 25/2 + 125/6 + ...
        let e = pexp(s(5, 3, 5)).unwrap();
        assert!(e.congruent_int(81, 3), "{e}");
        assert!(matches!(pexp(s(5, 3, 1)), Err(Error::ExpDivergent)));
        assert!(matches!(pexp(s(2, 8, 2)), Err(Error::ExpDivergent)));
        assert_eq!(pexp(PadicScalar::zero(5)).unwrap(), s(5, 12, 1));
        assert_eq!(pexp(PadicScalar::zero_to(5, 6)).unwrap().abs_prec(), 6);
    }

    #[test]
    fn exp_log_inverse_on_one_plus_p() {
        for p in [2u32, 3, 5, 7] {
            let x = s(p, 10, 1 + strict_one(p));
            assert_eq!(pexp(plog(x).unwrap()).unwrap(), x);
        }
    }

    fn strict_one(p: u32) -> i128 {
        if p == 2 {
            4
        } else {
            p as i128
        }
    }

    #[test]
    fn binomial_small_cases() {
        let u = s(5, 8, 7);
        assert_eq!(binomial(&u, 0), s(5, 8, 1));
        assert_eq!(binomial(&s(5, 8, 3), 2), s(5, 8, 3));
        assert_eq!(binomial(&s(5, 8, 5), 5), s(5, 8, 1));
        let half = PadicScalar::from_ratio(5, 8, 1, 2).unwrap();
        let b = binomial(&half, 5);
        assert!(b.valuation() >= 0);
        let third = PadicScalar::from_ratio(3, 8, 1, 3).unwrap();
        assert_eq!(binomial(&third, 3).valuation(), -4);
    }

    #[test]
    fn sqrt_canonical_choices() {
        assert_eq!(hensel_sqrt(s(5, 6, 1)).unwrap(), s(5, 6, 1));
        let r = hensel_sqrt(s(5, 2, 4)).unwrap();
        assert!(r.congruent_int(2, 2));
        let r6 = hensel_sqrt(s(5, 8, 6)).unwrap();
        assert_eq!(r6 * r6, s(5, 8, 6));
        assert_eq!(r6.unit() % 5, 1);
        assert!(matches!(hensel_sqrt(s(5, 6, 2)), Err(Error::NoSquareRoot)));
        assert!(matches!(hensel_sqrt(s(5, 6, 5)), Err(Error::NoSquareRoot)));
        let r17 = hensel_sqrt(s(2, 12, 17)).unwrap();
        assert_eq!(r17 * r17, s(2, 12, 17).reduce_rel(11));
        assert_eq!(r17.unit() % 4, 1);
        assert!(matches!(hensel_sqrt(s(2, 12, 5)), Err(Error::NoSquareRoot)));
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = PadicScalar::random(&mut rng, 7, 6, -3);
            let back = PadicScalar::from_repr(7, &x.serialize_repr()).unwrap();
            assert_eq!(back.valuation(), x.valuation());
            assert_eq!(back.unit(), x.unit());
            assert_eq!(back.rel_prec(), x.rel_prec());
        }
        let z = PadicScalar::zero(7);
        let j = serde_json::to_string(&z.serialize_repr()).unwrap();
        assert_eq!(j, r#"{"v":"inf","u":"0","N":0}"#);
        assert!(
            PadicScalar::from_repr(7, &serde_json::from_str(&j).unwrap())
                .unwrap()
                .is_exact_zero()
        );
    }

    #[test]
    fn json_rejects_bad_units() {
        let bad = ScalarJson {
            v: ValuationJson::Finite(0),
            u: "x".into(),
            n: 3,
        };
        assert!(matches!(
            PadicScalar::from_repr(5, &bad),
            Err(Error::Malformed(_))
        ));
        let bad = ScalarJson {
            v: ValuationJson::Finite(0),
            u: "10".into(),
            n: 3,
        };
        assert!(PadicScalar::from_repr(5, &bad).is_err());
    }
}
