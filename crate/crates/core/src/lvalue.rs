//! p-stabilizations, the trace-form pairing on `span{f*, V f*}`, Euler factors and the
//! triple-product bracket at classical points.

use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nearly::{hdagger, mul, nabla_n_closed, NearlyExp};
use crate::padic::{canonical_cmp, hensel_sqrt, max_precision, PadicScalar};
use crate::qexp::{deplete, eisenstein_classical, eta_product_integers, u_op, v_op, QExp};
use crate::ring::Weight;
use crate::spectral::{
    charpoly, eigen_projector, newton_polygon, slope_factor, solve, Matrix, PadicPoly, Slope,
};
use crate::symbolic::Laurent;

/// Where the q-expansion of a fixture form comes from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormSource {
    /// Classical Eisenstein series of the given weight, `a_0 = -B_k/(2k)`.
    Eisenstein(usize),
    Delta,
    /// `Π η(aτ)^e` as `(a, e)` pairs.
    EtaProduct(Vec<(usize, i64)>),
    /// Explicit integer coefficients from `q^0`.
    Coefficients(Vec<String>),
}

/// Hecke data of a classical eigenform of level prime to `p`.
#[derive(Clone, Debug)]
pub struct EigenformData {
    pub label: String,
    pub weight: u32,
    pub a_p: PadicScalar,
    pub chi_p: PadicScalar,
    pub source: FormSource,
    pub prime_to_p: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenformJson {
    pub label: String,
    pub weight: u32,
    pub a_p: String,
    #[serde(default = "one_string")]
    pub chi_p: String,
    pub source: FormSource,
    #[serde(default = "yes")]
    pub prime_to_p: bool,
}

fn one_string() -> String {
    "1".into()
}

fn yes() -> bool {
    true
}

fn parse_int(s: &str) -> Result<BigInt> {
    s.trim()
        .parse()
        .map_err(|_| Error::Malformed(format!("not an integer: {s:?}")))
}

impl EigenformData {
    /// `E_k` with trivial character, `a_p = 1 + p^{k-1}`.
    pub fn eisenstein(p: u32, n: u32, k: u32) -> Self {
        let c = PadicScalar::p_power(p, n, k as i64 - 1);
        EigenformData {
            label: format!("E{k}"),
            weight: k,
            a_p: PadicScalar::one(p, n) + c,
            chi_p: PadicScalar::one(p, n),
            source: FormSource::Eisenstein(k as usize),
            prime_to_p: true,
        }
    }

    pub fn delta(p: u32, n: u32) -> Self {
        let tau = eta_product_integers(&[(1, 24)], p as usize).expect("valid eta product");
        EigenformData {
            label: "Delta".into(),
            weight: 12,
            a_p: PadicScalar::from_bigint(p, n, &tau[p as usize]),
            chi_p: PadicScalar::one(p, n),
            source: FormSource::Delta,
            prime_to_p: true,
        }
    }

    pub fn p(&self) -> u32 {
        self.a_p.p()
    }

    /// `χ(p) p^{k-1}`.
    pub fn hecke_constant(&self) -> PadicScalar {
        self.chi_p * PadicScalar::p_power(self.p(), self.precision(), self.weight as i64 - 1)
    }

    fn precision(&self) -> u32 {
        self.chi_p.rel_prec().max(self.a_p.rel_prec()).max(1)
    }

    /// `X^2 - a_p X + χ(p) p^{k-1}`.
    pub fn hecke_polynomial(&self) -> PadicPoly {
        PadicPoly::new(
            self.p(),
            vec![
                self.hecke_constant(),
                -self.a_p,
                PadicScalar::one(self.p(), self.precision()),
            ],
        )
    }

    pub fn qexp(&self, p: u32, n: u32, q: usize) -> Result<QExp> {
        match &self.source {
            FormSource::Eisenstein(k) => eisenstein_classical(p, n, 1, *k, q),
            FormSource::Delta => Ok(QExp::from_bigints(
                p,
                n,
                1,
                &eta_product_integers(&[(1, 24)], q)?,
            )),
            FormSource::EtaProduct(f) => {
                Ok(QExp::from_bigints(p, n, 1, &eta_product_integers(f, q)?))
            }
            FormSource::Coefficients(cs) => {
                if cs.len() <= q {
                    return Err(Error::InvalidInput(format!(
                        "{} has {} coefficients, q-precision {q} requested",
                        self.label,
                        cs.len()
                    )));
                }
                let xs = cs[..=q]
                    .iter()
                    .map(|c| parse_int(c))
                    .collect::<Result<Vec<_>>>()?;
                Ok(QExp::from_bigints(p, n, 1, &xs))
            }
        }
    }

    pub fn to_json(&self) -> EigenformJson {
        let int = |x: &PadicScalar| {
            x.to_integer()
                .map_or_else(|| x.to_string(), |v| v.to_string())
        };
        EigenformJson {
            label: self.label.clone(),
            weight: self.weight,
            a_p: int(&self.a_p),
            chi_p: int(&self.chi_p),
            source: self.source.clone(),
            prime_to_p: self.prime_to_p,
        }
    }

    pub fn from_json(p: u32, n: u32, j: &EigenformJson) -> Result<Self> {
        if j.weight < 2 {
            return Err(Error::InvalidInput(format!(
                "{}: weight {} < 2",
                j.label, j.weight
            )));
        }
        let chi_p = PadicScalar::from_bigint(p, n, &parse_int(&j.chi_p)?);
        if !chi_p.is_unit() {
            return Err(Error::InvalidInput(format!(
                "{}: χ(p) must be a unit",
                j.label
            )));
        }
        Ok(EigenformData {
            label: j.label.clone(),
            weight: j.weight,
            a_p: PadicScalar::from_bigint(p, n, &parse_int(&j.a_p)?),
            chi_p,
            source: j.source.clone(),
            prime_to_p: j.prime_to_p,
        })
    }
}

/// Roots of the Hecke polynomial ordered by valuation, then residue.
pub fn solve_hecke_quadratic(f: &EigenformData) -> Result<(PadicScalar, PadicScalar)> {
    let poly = f.hecke_polynomial();
    let slopes = newton_polygon(&poly);
    let (alpha, beta) = match slopes.as_slice() {
        [(Slope::Finite(h), 1), (_, 1)] => {
            let (le, gt) = slope_factor(&poly, *h)?;
            let alpha = -le.coeff(0);
            let beta = (-gt.coeff(0)).try_div(gt.coeff(1))?;
            (alpha, beta)
        }
        [(Slope::Infinite, 2)] => return Err(Error::RepeatedRoot),
        _ => {
            let four = PadicScalar::from_int(f.p(), f.precision(), 4);
            let disc = f.a_p * f.a_p - four * f.hecke_constant();
            if disc.is_zero() {
                return Err(Error::RepeatedRoot);
            }
            let root = hensel_sqrt(disc).map_err(|_| Error::NeedsQuadraticExtension)?;
            let two = PadicScalar::from_int(f.p(), f.precision(), 2);
            ((f.a_p + root).try_div(two)?, (f.a_p - root).try_div(two)?)
        }
    };
    if alpha == beta {
        return Err(Error::RepeatedRoot);
    }
    if canonical_cmp(&alpha, &beta).is_gt() {
        Ok((beta, alpha))
    } else {
        Ok((alpha, beta))
    }
}

/// The two p-stabilizations `f_α = f - βV f`, `f_β = f - αV f`.
#[derive(Clone, Debug)]
pub struct StabilizedPair {
    pub alpha: PadicScalar,
    pub beta: PadicScalar,
    pub f: QExp,
    pub f_alpha: QExp,
    pub f_beta: QExp,
}

impl StabilizedPair {
    /// `(α f_α - β f_β) / (α - β)`.
    pub fn recover(&self) -> Result<QExp> {
        let d = (self.alpha - self.beta).inv()?;
        Ok((&self.f_alpha.scale(self.alpha) - &self.f_beta.scale(self.beta)).scale(d))
    }
}

pub fn stabilize(f: &EigenformData, n: u32, q: usize) -> Result<StabilizedPair> {
    let (alpha, beta) = solve_hecke_quadratic(f)?;
    let form = f.qexp(f.p(), n, q)?;
    let vf = v_op(&form);
    Ok(StabilizedPair {
        alpha,
        beta,
        f_alpha: &form - &vf.scale(beta),
        f_beta: &form - &vf.scale(alpha),
        f: form,
    })
}

/// U on the basis `(f, Vf)`, columns holding images.
pub fn u_matrix_on_span(f: &EigenformData) -> Matrix {
    let p = f.p();
    let n = f.precision();
    Matrix::from_rows(
        p,
        vec![
            vec![f.a_p, PadicScalar::one(p, n)],
            vec![-f.hecke_constant(), PadicScalar::zero(p)],
        ],
    )
}

/// `χ(p)^2 a_p / (p^{k-1}(p+1))`, the ratio `⟨δ, Vγ⟩ / ⟨δ, γ⟩`.
pub fn petersson_factor(f: &EigenformData) -> Result<PadicScalar> {
    let p = f.p();
    let n = f.precision();
    let den = PadicScalar::p_power(p, n, f.weight as i64 - 1)
        * PadicScalar::from_int(p, n, p as i128 + 1);
    (f.chi_p * f.chi_p * f.a_p).try_div(den)
}

/// `⟨f*, x f* + y V f*⟩` with `⟨f*, f*⟩ = 1`.
pub fn petersson_pair(
    f_star: &EigenformData,
    x: PadicScalar,
    y: PadicScalar,
) -> Result<PadicScalar> {
    Ok(x + y * petersson_factor(f_star)?)
}

fn coefficient_column(f: &QExp, q: usize) -> Result<Vec<PadicScalar>> {
    (0..=q)
        .map(|i| {
            let c = f.coeff(i);
            if c.is_constant() {
                Ok(c.constant_term())
            } else {
                Err(Error::InvalidInput(
                    "eigen coordinates need classical q-expansions".into(),
                ))
            }
        })
        .collect()
}

/// Exact coordinates of `F` in `basis`, with the residual checked on every computed
/// coefficient.
pub fn eigen_coordinates(form: &QExp, basis: &[QExp]) -> Result<Vec<PadicScalar>> {
    if basis.is_empty() {
        return Err(Error::InvalidInput("empty basis".into()));
    }
    let q = basis
        .iter()
        .map(|b| b.prec())
        .min()
        .unwrap()
        .min(form.prec());
    if q + 1 < basis.len() {
        return Err(Error::InvalidInput(format!(
            "{} basis forms but only {} coefficients",
            basis.len(),
            q + 1
        )));
    }
    let p = form.p();
    let cols = basis
        .iter()
        .map(|b| coefficient_column(b, q))
        .collect::<Result<Vec<_>>>()?;
    let rhs = coefficient_column(form, q)?;
    let mut a = Matrix::zero(p, q + 1, basis.len());
    for (j, col) in cols.iter().enumerate() {
        for (i, x) in col.iter().enumerate() {
            a.set(i, j, *x);
        }
    }
    let x = solve(&a, &rhs)?;
    let residual = basis.iter().zip(&x).fold(form.truncate(q), |acc, (b, c)| {
        &acc - &b.truncate(q).scale(*c)
    });
    if !residual.is_zero() {
        return Err(Error::OutsideSpan);
    }
    Ok(x)
}

/// Rings the Euler factors can be evaluated in.
pub trait BracketRing:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self>
{
    fn unit_like(&self) -> Self;
    fn try_inverse(&self) -> Result<Self>;
}

impl BracketRing for PadicScalar {
    fn unit_like(&self) -> Self {
        PadicScalar::one(self.p(), max_precision(self.p()))
    }

    fn try_inverse(&self) -> Result<Self> {
        self.inv()
    }
}

impl BracketRing for Laurent {
    fn unit_like(&self) -> Self {
        Laurent::one(self.nvars())
    }

    fn try_inverse(&self) -> Result<Self> {
        self.inv_monomial()
    }
}

/// Hecke roots and the constants entering the Euler factors; `pt = p^{t'}` and `rho` is
/// the pairing factor of `f*`.
#[derive(Clone, Debug)]
pub struct EulerFactors<R> {
    pub alpha_y: R,
    pub beta_y: R,
    pub alpha_z: R,
    pub beta_z: R,
    pub alpha_star: R,
    pub beta_star: R,
    pub pt: R,
    pub rho: R,
}

impl<R: BracketRing> EulerFactors<R> {
    fn one(&self) -> R {
        self.pt.unit_like()
    }

    /// `Π (1 - p^{t'} y z T^{-1})` over the roots `y` of g and `z` of h.
    pub fn e(&self, t: &R) -> Result<R> {
        let ti = t.try_inverse()?;
        let mut acc = self.one();
        for y in [&self.alpha_y, &self.beta_y] {
            for z in [&self.alpha_z, &self.beta_z] {
                acc = acc * (self.one() - self.pt.clone() * y.clone() * z.clone() * ti.clone());
            }
        }
        Ok(acc)
    }

    /// `1 - p^{2t'} α_y β_y α_z β_z T^{-2}`.
    pub fn e1(&self, t: &R) -> Result<R> {
        let ti = t.try_inverse()?;
        let prod =
            self.alpha_y.clone() * self.beta_y.clone() * self.alpha_z.clone() * self.beta_z.clone();
        Ok(self.one() - self.pt.clone() * self.pt.clone() * prod * ti.clone() * ti)
    }

    /// `1 - T/S`.
    pub fn e0(&self, s: &R, t: &R) -> Result<R> {
        Ok(self.one() - t.clone() * s.try_inverse()?)
    }

    /// `1 - ρ T`.
    pub fn e2(&self, t: &R) -> R {
        self.one() - self.rho.clone() * t.clone()
    }

    /// Numerator and denominator of the bracket over the common denominator
    /// `E0(α*,β*) E0(β*,α*) E1(α*) E1(β*)`.
    pub fn bracket_parts(&self) -> Result<(R, R)> {
        let (a, b) = (&self.alpha_star, &self.beta_star);
        let num = self.e(a)? * self.e2(b) * self.e0(b, a)? * self.e1(b)?
            + self.e(b)? * self.e2(a) * self.e0(a, b)? * self.e1(a)?;
        let den = self.e0(a, b)? * self.e0(b, a)? * self.e1(a)? * self.e1(b)?;
        Ok((num, den))
    }
}

impl EulerFactors<PadicScalar> {
    /// Factors at a classical point from the Hecke data of `f*`, `g`, `h`.
    pub fn at_point(
        f_star: &EigenformData,
        g: &EigenformData,
        h: &EigenformData,
        t: u32,
    ) -> Result<Self> {
        let (alpha_star, beta_star) = solve_hecke_quadratic(f_star)?;
        let (alpha_y, beta_y) = solve_hecke_quadratic(g)?;
        let (alpha_z, beta_z) = solve_hecke_quadratic(h)?;
        let p = f_star.p();
        Ok(EulerFactors {
            alpha_y,
            beta_y,
            alpha_z,
            beta_z,
            alpha_star,
            beta_star,
            pt: PadicScalar::p_power(p, max_precision(p), t as i64),
            rho: petersson_factor(f_star)?,
        })
    }
}

/// The bracket `E(α*)E2(β*)/(E0(α*,β*)E1(α*)) + E(β*)E2(α*)/(E0(β*,α*)E1(β*))`.
pub fn interpolation_bracket(e: &EulerFactors<PadicScalar>) -> Result<PadicScalar> {
    let (a, b) = (e.alpha_star, e.beta_star);
    if (a - b).is_zero() {
        return Err(Error::RepeatedRoot);
    }
    let first = (e.e(&a)? * e.e2(&b)).try_div(e.e0(&a, &b)? * e.e1(&a)?)?;
    let second = (e.e(&b)? * e.e2(&a)).try_div(e.e0(&b, &a)? * e.e1(&b)?)?;
    Ok(first + second)
}

/// The same quantity through the stabilizations of `γ = f*`: solve `γ = c_α γ_α + c_β γ_β`
/// on `(f*, V f*)`, scale each stabilization by its `E/E1` eigenvalue and pair.
pub fn bracket_by_stabilizations(e: &EulerFactors<PadicScalar>) -> Result<PadicScalar> {
    let (a, b) = (e.alpha_star, e.beta_star);
    let p = a.p();
    let one = PadicScalar::one(p, max_precision(p));
    let zero = PadicScalar::zero(p);
    let stab = Matrix::from_rows(p, vec![vec![one, one], vec![-b, -a]]);
    let c = solve(&stab, &[one, zero])?;
    let scale_a = e.e(&a)?.try_div(e.e1(&a)?)?;
    let scale_b = e.e(&b)?.try_div(e.e1(&b)?)?;
    let x = c[0] * scale_a + c[1] * scale_b;
    let y = -(c[0] * scale_a * b) - c[1] * scale_b * a;
    Ok(x + y * e.rho)
}

/// Indeterminates of the symbolic identity, with `p^{t'}` absorbed into the roots of g.
pub const SYMBOLIC_VARS: [&str; 7] = [
    "alpha_y",
    "beta_y",
    "alpha_z",
    "beta_z",
    "alpha_star",
    "beta_star",
    "rho",
];

pub fn symbolic_factors() -> EulerFactors<Laurent> {
    let v = |i| Laurent::var(7, i);
    EulerFactors {
        alpha_y: v(0),
        beta_y: v(1),
        alpha_z: v(2),
        beta_z: v(3),
        alpha_star: v(4),
        beta_star: v(5),
        pt: Laurent::one(7),
        rho: v(6),
    }
}

type M2 = [[Laurent; 2]; 2];

fn m2_mul(a: &M2, b: &M2) -> M2 {
    let e = |i: usize, j: usize| &(&a[i][0] * &b[0][j]) + &(&a[i][1] * &b[1][j]);
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

fn m2_identity() -> M2 {
    [
        [Laurent::one(7), Laurent::zero(7)],
        [Laurent::zero(7), Laurent::one(7)],
    ]
}

fn m2_affine(c: &Laurent, m: &M2) -> M2 {
    // I - c M
    let id = m2_identity();
    let e = |i: usize, j: usize| &id[i][j] - &(c * &m[i][j]);
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

#[derive(Clone, Debug, Serialize)]
pub struct SymbolicCheck {
    pub numerator_terms: usize,
    pub linear_algebra_terms: usize,
    pub max_total_degree: i32,
    pub determinant_identity: bool,
    pub holds: bool,
}

/// Compares the cleared numerator of the bracket with the value obtained by letting
/// `E(U) E1(U)^{-1}` act on `f*` inside `span{f*, V f*}` and pairing.
pub fn symbolic_bracket_identity() -> Result<SymbolicCheck> {
    let e = symbolic_factors();
    let (num, _den) = e.bracket_parts()?;
    let (a, b) = (&e.alpha_star, &e.beta_star);
    let ab = a * b;
    let zero = Laurent::zero(7);
    let one = Laurent::one(7);
    // U = [[A+B, 1], [-AB, 0]] and its inverse (1/AB) [[0, -1], [AB, A+B]].
    let ab_inv = ab.inv_monomial()?;
    let u_inv: M2 = [[zero.clone(), -&ab_inv], [one.clone(), &(a + b) * &ab_inv]];
    let mut e_u = m2_identity();
    for y in [&e.alpha_y, &e.beta_y] {
        for z in [&e.alpha_z, &e.beta_z] {
            e_u = m2_mul(&e_u, &m2_affine(&(y * z), &u_inv));
        }
    }
    let yz = &(&e.alpha_y * &e.beta_y) * &(&e.alpha_z * &e.beta_z);
    let e1_u = m2_affine(&yz, &m2_mul(&u_inv, &u_inv));
    let adj: M2 = [
        [e1_u[1][1].clone(), -&e1_u[0][1]],
        [-&e1_u[1][0], e1_u[0][0].clone()],
    ];
    let det = &(&e1_u[0][0] * &e1_u[1][1]) - &(&e1_u[0][1] * &e1_u[1][0]);
    let determinant_identity = det == &e.e1(a)? * &e.e1(b)?;
    let acted = m2_mul(&e_u, &adj);
    let pairing = &acted[0][0] + &(&e.rho * &acted[1][0]);
    let lhs = &(&pairing * &e.e0(a, b)?) * &e.e0(b, a)?;
    Ok(SymbolicCheck {
        numerator_terms: num.num_terms(),
        linear_algebra_terms: lhs.num_terms(),
        max_total_degree: num.total_degree(),
        determinant_identity,
        holds: determinant_identity && lhs == num,
    })
}

/// Named q-expansions spanning a finite U-stable space; positions 0 and 1 hold `f*` and
/// `V f*`.
#[derive(Clone, Debug)]
pub struct FixtureBasis {
    pub labels: Vec<String>,
    pub forms: Vec<QExp>,
}

fn int_series_mul(a: &[BigInt], b: &[BigInt], q: usize) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); q + 1];
    for (i, x) in a.iter().enumerate().take(q + 1) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(q + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// `θ(q)^4` with `θ = Σ_{n ∈ Z} q^{n^2}`.
pub fn theta4(q: usize) -> Vec<BigInt> {
    let mut theta = vec![BigInt::zero(); q + 1];
    theta[0] = BigInt::one();
    let mut k = 1usize;
    while k * k <= q {
        theta[k * k] += 2;
        k += 1;
    }
    let sq = int_series_mul(&theta, &theta, q);
    int_series_mul(&sq, &sq, q)
}

/// `Σ_{n odd} σ_1(n) q^n`, a weight 2 form on `Γ0(4)`.
pub fn odd_sigma1(q: usize) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); q + 1];
    for d in (1..=q).step_by(2) {
        for m in (d..=q).step_by(2 * d) {
            out[m] += d;
        }
    }
    out
}

impl FixtureBasis {
    pub fn new(labels: Vec<String>, forms: Vec<QExp>) -> Result<Self> {
        if labels.len() != forms.len() || forms.len() < 2 {
            return Err(Error::InvalidInput(
                "fixture basis needs matching labels and at least f*, V f*".into(),
            ));
        }
        Ok(FixtureBasis { labels, forms })
    }

    /// `f, V f, ..., V^depth f`.
    pub fn old_space(f: &EigenformData, n: u32, q: usize, depth: usize) -> Result<Self> {
        let mut forms = vec![f.qexp(f.p(), n, q)?];
        let mut labels = vec![f.label.clone()];
        for i in 1..=depth {
            forms.push(v_op(forms.last().unwrap()));
            labels.push(if i == 1 {
                format!("V {}", f.label)
            } else {
                format!("V^{i} {}", f.label)
            });
        }
        Self::new(labels, forms)
    }

    /// All of `M_k(Γ0(4))` for `p = 2`: the old space of `f` up to `V^2`, completed by
    /// monomials `θ^{4i} F^j` with `i + j = k/2`.
    pub fn level_four(f: &EigenformData, n: u32, q: usize) -> Result<Self> {
        if f.p() != 2 || !f.weight.is_multiple_of(2) {
            return Err(Error::InvalidInput(
                "level four fixture needs p = 2 and even weight".into(),
            ));
        }
        let mut basis = Self::old_space(f, n, q, 2)?;
        let half = f.weight as usize / 2;
        let dim = half + 1;
        let (t4, ff) = (theta4(q), odd_sigma1(q));
        for i in 0..=half {
            if basis.forms.len() == dim {
                break;
            }
            let mut mono = vec![BigInt::zero(); q + 1];
            mono[0] = BigInt::one();
            for _ in 0..i {
                mono = int_series_mul(&mono, &t4, q);
            }
            for _ in 0..half - i {
                mono = int_series_mul(&mono, &ff, q);
            }
            let cand = QExp::from_bigints(2, n, 1, &mono);
            let mut trial = basis.forms.clone();
            trial.push(cand.clone());
            if coefficient_matrix(&trial, q)?.rank() == trial.len() {
                basis.forms.push(cand);
                basis.labels.push(format!("theta^{} F^{}", 4 * i, half - i));
            }
        }
        if basis.forms.len() != dim {
            return Err(Error::DependentBasis);
        }
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

fn coefficient_matrix(forms: &[QExp], q: usize) -> Result<Matrix> {
    let p = forms[0].p();
    let mut a = Matrix::zero(p, q + 1, forms.len());
    for (j, f) in forms.iter().enumerate() {
        for (i, x) in coefficient_column(f, q)?.into_iter().enumerate() {
            a.set(i, j, x);
        }
    }
    Ok(a)
}

/// A fixture basis with the matrix of U on it.
#[derive(Clone, Debug)]
pub struct SpanModel {
    pub basis: FixtureBasis,
    pub u: Matrix,
}

impl SpanModel {
    pub fn new(basis: FixtureBasis) -> Result<Self> {
        let images: Vec<QExp> = basis.forms.iter().map(u_op).collect();
        let q = images.iter().map(|f| f.prec()).min().unwrap();
        let truncated: Vec<QExp> = basis.forms.iter().map(|f| f.truncate(q)).collect();
        let p = basis.forms[0].p();
        let mut u = Matrix::zero(p, basis.len(), basis.len());
        for (j, img) in images.iter().enumerate() {
            let col = eigen_coordinates(img, &truncated)
                .map_err(|e| e.at_stage(format!("U({})", basis.labels[j])))?;
            for (i, x) in col.into_iter().enumerate() {
                u.set(i, j, x);
            }
        }
        Ok(SpanModel { basis, u })
    }

    pub fn coordinates(&self, form: &QExp) -> Result<Vec<PadicScalar>> {
        eigen_coordinates(form, &self.basis.forms)
    }

    /// `w` in the image of `e` with `U w = v`, for `v` in that image.
    pub fn u_inverse_on(&self, e: &Matrix, v: &[PadicScalar]) -> Result<Vec<PadicScalar>> {
        let size = self.u.rows();
        let n = v.iter().map(|x| x.rel_prec()).max().unwrap_or(1).max(1);
        let shifted = self.u.add(&Matrix::identity(self.u.p(), n, size).sub(e));
        solve(&shifted, v)
    }
}

/// Parameters of the bracket pipeline.
#[derive(Clone, Debug)]
pub struct TripleConfig {
    pub t: u32,
    pub slope: Ratio<i64>,
    pub floor: i64,
    /// Use `g^{[p]}`; disabling gives the comparison pipeline with `g` itself.
    pub deplete: bool,
}

#[derive(Clone, Debug)]
pub struct TripleOutcome {
    pub value: PadicScalar,
    /// Coordinates after the slope and eigenspace projections.
    pub coordinates: Vec<PadicScalar>,
    pub stage_log: Vec<String>,
}

/// `H†(∇^t g × h)` as a classical q-expansion of weight `y + z + 2t`.
pub fn holomorphic_product(
    g: &QExp,
    y: u32,
    h: &QExp,
    z: u32,
    t: u32,
    floor: i64,
) -> Result<(QExp, Vec<String>)> {
    let (p, n) = (g.p(), g.n());
    let mut log = Vec::new();
    let w = nabla_n_closed(
        &NearlyExp::from_qexp(Weight::integer(p, n, 1, y as i64), g.clone()),
        t,
    );
    log.push(format!(
        "nabla: weight {}, degree {}",
        y + 2 * t,
        w.degree()
    ));
    let prod = mul(
        &w,
        &NearlyExp::from_qexp(Weight::integer(p, n, 1, z as i64), h.clone()),
    );
    log.push(format!(
        "product: weight {}, Q = {}",
        y + z + 2 * t,
        prod.prec()
    ));
    let k = (y + z + 2 * t) as i64;
    let proj = hdagger(&prod, &Weight::integer(p, n, 1, k - 2), floor)
        .map_err(|e| e.at_stage("hdagger"))?;
    log.push(format!("hdagger: precision loss {}", proj.precision_loss));
    Ok((proj.form, log))
}

/// `⟨f*, e_{f*} H^{†,≤a}(∇^{t'} g^{[p]} × h)⟩` with `⟨f*, f*⟩ = 1`.
pub fn triple_bracket(
    f_star: &EigenformData,
    g: &EigenformData,
    h: &EigenformData,
    model: &SpanModel,
    cfg: &TripleConfig,
) -> Result<TripleOutcome> {
    let p = f_star.p();
    let base = model.basis.forms[0].clone();
    let (n, q) = (base.n(), base.prec());
    if f_star.weight != g.weight + h.weight + 2 * cfg.t {
        return Err(Error::WeightMismatch(format!(
            "k = {} but l + m + 2t' = {}",
            f_star.weight,
            g.weight + h.weight + 2 * cfg.t
        )));
    }
    let mut g_form = g.qexp(p, n, q).map_err(|e| e.at_stage("nabla"))?;
    if cfg.deplete {
        g_form = deplete(&g_form);
    }
    let h_form = h.qexp(p, n, q).map_err(|e| e.at_stage("product"))?;
    let (form, mut log) =
        holomorphic_product(&g_form, g.weight, &h_form, h.weight, cfg.t, cfg.floor)?;
    let coords = model
        .coordinates(&form)
        .map_err(|e| e.at_stage("coordinates"))?;
    log.push(format!("coordinates: {} basis forms", coords.len()));
    let (value, projected) = project_and_pair(f_star, model, &coords, cfg.slope)
        .map_err(|e| e.at_stage("projection"))?;
    log.push(format!("pairing: value {value}"));
    Ok(TripleOutcome {
        value,
        coordinates: projected,
        stage_log: log,
    })
}

/// Slope `≤ a` projection, then the generalized eigenspace of the roots of `f*`, then
/// the pairing.
pub fn project_and_pair(
    f_star: &EigenformData,
    model: &SpanModel,
    coords: &[PadicScalar],
    slope: Ratio<i64>,
) -> Result<(PadicScalar, Vec<PadicScalar>)> {
    let (alpha, beta) = solve_hecke_quadratic(f_star)?;
    let kept: Vec<PadicScalar> = [alpha, beta]
        .into_iter()
        .filter(|r| Slope::of(r).at_most(slope))
        .collect();
    let w = eigen_projector(&model.u, &kept)?.mul_vec(coords);
    if w.iter().skip(2).any(|x| !x.is_zero()) {
        return Err(Error::InvalidInput(
            "eigenspace projection leaves span{f*, V f*}".into(),
        ));
    }
    Ok((petersson_pair(f_star, w[0], w[1])?, w))
}

/// Characteristic polynomial of U on the model, for reporting.
pub fn model_charpoly(model: &SpanModel) -> PadicPoly {
    charpoly(&model.u)
}
