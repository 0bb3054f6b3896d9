//! Slope theory over `Q_p`: Newton polygons, slope factorization, Riesz and ordinary
//! projectors, and finite filtered models of the U operator.

use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{max_precision, PadicScalar, ScalarJson};

#[derive(Clone, Debug)]
pub struct Matrix {
    p: u32,
    rows: usize,
    cols: usize,
    data: Vec<PadicScalar>,
}

impl Matrix {
    pub fn zero(p: u32, rows: usize, cols: usize) -> Self {
        Matrix {
            p,
            rows,
            cols,
            data: vec![PadicScalar::zero(p); rows * cols],
        }
    }

    pub fn identity(p: u32, n: u32, size: usize) -> Self {
        let mut m = Self::zero(p, size, size);
        for i in 0..size {
            m.data[i * size + i] = PadicScalar::one(p, n);
        }
        m
    }

    pub fn from_rows(p: u32, rows: Vec<Vec<PadicScalar>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged matrix");
        Matrix {
            p,
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_ints(p: u32, n: u32, rows: &[&[i128]]) -> Self {
        Self::from_rows(
            p,
            rows.iter()
                .map(|r| r.iter().map(|x| PadicScalar::from_int(p, n, *x)).collect())
                .collect(),
        )
    }

    pub fn diagonal(p: u32, entries: &[PadicScalar]) -> Self {
        let mut m = Self::zero(p, entries.len(), entries.len());
        for (i, e) in entries.iter().enumerate() {
            m.data[i * entries.len() + i] = *e;
        }
        m
    }

    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        p: u32,
        n: u32,
        rows: usize,
        cols: usize,
        min_val: i64,
    ) -> Self {
        Matrix {
            p,
            rows,
            cols,
            data: (0..rows * cols)
                .map(|_| PadicScalar::random(rng, p, n, min_val))
                .collect(),
        }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> PadicScalar {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: PadicScalar) {
        self.data[i * self.cols + j] = x;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn valuation(&self) -> i64 {
        self.data
            .iter()
            .map(|x| x.valuation())
            .min()
            .unwrap_or(i64::MAX)
    }

    pub fn column(&self, j: usize) -> Vec<PadicScalar> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn block(&self, r0: usize, c0: usize, r: usize, c: usize) -> Matrix {
        let mut out = Matrix::zero(self.p, r, c);
        for i in 0..r {
            for j in 0..c {
                out.set(i, j, self.get(r0 + i, c0 + j));
            }
        }
        out
    }

    pub fn scale(&self, c: PadicScalar) -> Matrix {
        Matrix {
            data: self.data.iter().map(|x| *x * c).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, o: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Matrix {
            data: self
                .data
                .iter()
                .zip(&o.data)
                .map(|(a, b)| *a + *b)
                .collect(),
            ..self.clone()
        }
    }

    pub fn sub(&self, o: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Matrix {
            data: self
                .data
                .iter()
                .zip(&o.data)
                .map(|(a, b)| *a - *b)
                .collect(),
            ..self.clone()
        }
    }

    pub fn mul(&self, o: &Matrix) -> Matrix {
        assert_eq!(self.cols, o.rows, "dimension mismatch");
        let mut out = Matrix::zero(self.p, self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_exact_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = o.get(k, j);
                    if !b.is_exact_zero() {
                        out.data[i * o.cols + j] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zero(self.p, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[PadicScalar]) -> Vec<PadicScalar> {
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(PadicScalar::zero(self.p), |acc, j| {
                    acc + self.get(i, j) * v[j]
                })
            })
            .collect()
    }

    pub fn pow(&self, mut e: u64, n: u32) -> Matrix {
        let mut base = self.clone();
        let mut acc = Matrix::identity(self.p, n, self.rows);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Rank over `Q_p`, counting pivots that are nonzero to precision.
    pub fn rank(&self) -> usize {
        let mut a = self.clone();
        let mut rank = 0;
        for c in 0..a.cols {
            if rank == a.rows {
                break;
            }
            let Some(piv) = pivot_row(&a, c, rank) else {
                continue;
            };
            a.swap_rows(rank, piv);
            let inv = a.get(rank, c).inv().expect("nonzero pivot");
            for r in rank + 1..a.rows {
                let f = a.get(r, c) * inv;
                if f.is_exact_zero() {
                    continue;
                }
                for j in c..a.cols {
                    let v = a.get(r, j) - f * a.get(rank, j);
                    a.set(r, j, v);
                }
            }
            rank += 1;
        }
        rank
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn to_json(&self, blocks: Option<Vec<usize>>) -> MatrixJson {
        MatrixJson {
            p: self.p,
            rows: self.rows,
            cols: self.cols,
            entries: self.data.iter().map(|x| x.serialize_repr()).collect(),
            blocks,
        }
    }

    pub fn from_json(j: &MatrixJson) -> Result<Matrix> {
        if j.entries.len() != j.rows * j.cols {
            return Err(Error::Malformed(format!(
                "{}x{} matrix with {} entries",
                j.rows,
                j.cols,
                j.entries.len()
            )));
        }
        let data = j
            .entries
            .iter()
            .map(|e| PadicScalar::from_repr(j.p, e))
            .collect::<Result<_>>()?;
        Ok(Matrix {
            p: j.p,
            rows: j.rows,
            cols: j.cols,
            data,
        })
    }
}

impl PartialEq for Matrix {
    fn eq(&self, o: &Self) -> bool {
        self.rows == o.rows
            && self.cols == o.cols
            && self.data.iter().zip(&o.data).all(|(a, b)| a == b)
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Row-major wire form with optional block sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub p: u32,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<ScalarJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<usize>>,
}

fn pivot_row(a: &Matrix, col: usize, start: usize) -> Option<usize> {
    (start..a.rows)
        .filter(|&r| !a.get(r, col).is_zero())
        .min_by_key(|&r| a.get(r, col).valuation())
}

/// Solves `A x = b` for `A` with at least as many rows as columns. Every column must
/// carry a pivot; rows left over after elimination must reduce to zero.
pub fn solve(a: &Matrix, b: &[PadicScalar]) -> Result<Vec<PadicScalar>> {
    assert_eq!(a.rows, b.len());
    let (rows, cols) = (a.rows, a.cols);
    let mut aug = Matrix::zero(a.p, rows, cols + 1);
    for i in 0..rows {
        for j in 0..cols {
            aug.set(i, j, a.get(i, j));
        }
        aug.set(i, cols, b[i]);
    }
    for c in 0..cols {
        let piv = pivot_row(&aug, c, c).ok_or(Error::DependentBasis)?;
        aug.swap_rows(c, piv);
        let inv = aug.get(c, c).inv()?;
        for r in c + 1..rows {
            let f = aug.get(r, c) * inv;
            if f.is_exact_zero() {
                continue;
            }
            for j in c..=cols {
                let v = aug.get(r, j) - f * aug.get(c, j);
                aug.set(r, j, v);
            }
        }
    }
    if (cols..rows).any(|r| !aug.get(r, cols).is_zero()) {
        return Err(Error::OutsideSpan);
    }
    let mut x = vec![PadicScalar::zero(a.p); cols];
    for c in (0..cols).rev() {
        let mut acc = aug.get(c, cols);
        for j in c + 1..cols {
            acc -= aug.get(c, j) * x[j];
        }
        x[c] = acc.try_div(aug.get(c, c))?;
    }
    Ok(x)
}

/// Polynomial `c_0 + c_1 X + ... + c_d X^d` over `Q_p`.
#[derive(Clone, Debug)]
pub struct PadicPoly {
    p: u32,
    coeffs: Vec<PadicScalar>,
}

impl PadicPoly {
    pub fn new(p: u32, coeffs: Vec<PadicScalar>) -> Self {
        let mut r = PadicPoly { p, coeffs };
        r.normalize();
        r
    }

    pub fn from_ints(p: u32, n: u32, xs: &[i128]) -> Self {
        Self::new(
            p,
            xs.iter().map(|x| PadicScalar::from_int(p, n, *x)).collect(),
        )
    }

    pub fn one(p: u32, n: u32) -> Self {
        Self::new(p, vec![PadicScalar::one(p, n)])
    }

    /// `Π (X - r)`.
    pub fn from_roots(p: u32, n: u32, roots: &[PadicScalar]) -> Self {
        roots.iter().fold(Self::one(p, n), |acc, r| {
            acc.mul(&Self::new(p, vec![-*r, PadicScalar::one(p, n)]))
        })
    }

    fn normalize(&mut self) {
        while self.coeffs.len() > 1 && self.coeffs.last().unwrap().is_exact_zero() {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(PadicScalar::zero(self.p));
        }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[PadicScalar] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> PadicScalar {
        self.coeffs
            .get(i)
            .copied()
            .unwrap_or_else(|| PadicScalar::zero(self.p))
    }

    pub fn leading(&self) -> PadicScalar {
        *self.coeffs.last().unwrap()
    }

    pub fn is_monic(&self) -> bool {
        let l = self.leading();
        (l - PadicScalar::one(self.p, l.rel_prec().max(1))).is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn scale(&self, c: PadicScalar) -> Self {
        Self::new(self.p, self.coeffs.iter().map(|x| *x * c).collect())
    }

    pub fn add(&self, o: &Self) -> Self {
        let d = self.coeffs.len().max(o.coeffs.len());
        Self::new(self.p, (0..d).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        let d = self.coeffs.len().max(o.coeffs.len());
        Self::new(self.p, (0..d).map(|i| self.coeff(i) - o.coeff(i)).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = vec![PadicScalar::zero(self.p); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_exact_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += *a * *b;
            }
        }
        Self::new(self.p, out)
    }

    /// `X^d P(1/X)` with `d` the degree.
    pub fn reverse(&self) -> Self {
        Self::new(self.p, self.coeffs.iter().rev().copied().collect())
    }

    pub fn eval(&self, x: PadicScalar) -> PadicScalar {
        self.coeffs
            .iter()
            .rev()
            .fold(PadicScalar::zero(self.p), |acc, c| acc * x + *c)
    }

    pub fn eval_matrix(&self, m: &Matrix, n: u32) -> Matrix {
        let size = m.rows;
        let mut acc = Matrix::zero(self.p, size, size);
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(m).add(&Matrix::identity(self.p, n, size).scale(*c));
        }
        acc
    }

    /// Division by a monic polynomial.
    pub fn div_rem(&self, d: &PadicPoly) -> (PadicPoly, PadicPoly) {
        let dd = d.degree();
        if self.degree() < dd {
            return (
                PadicPoly::new(self.p, vec![PadicScalar::zero(self.p)]),
                self.clone(),
            );
        }
        let mut rem = self.coeffs.clone();
        let mut quot = vec![PadicScalar::zero(self.p); self.degree() - dd + 1];
        for i in (0..quot.len()).rev() {
            let c = rem[i + dd];
            quot[i] = c;
            for (j, dc) in d.coeffs.iter().enumerate() {
                rem[i + j] -= c * *dc;
            }
        }
        rem.truncate(dd.max(1));
        (PadicPoly::new(self.p, quot), PadicPoly::new(self.p, rem))
    }

    /// Lifts every coefficient to relative precision `w`, keeping its residue.
    fn lifted(&self, w: u32) -> Self {
        Self::new(self.p, self.coeffs.iter().map(|c| c.lift(w)).collect())
    }
}

impl PartialEq for PadicPoly {
    fn eq(&self, o: &Self) -> bool {
        let d = self.coeffs.len().max(o.coeffs.len());
        (0..d).all(|i| self.coeff(i) == o.coeff(i))
    }
}

impl fmt::Display for PadicPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_exact_zero())
            .map(|(i, c)| format!("({c})X^{i}"))
            .collect();
        write!(
            f,
            "{}",
            if terms.is_empty() {
                "0".to_string()
            } else {
                terms.join(" + ")
            }
        )
    }
}

/// Root valuation of a Newton segment; zero roots have infinite slope.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slope {
    Finite(Ratio<i64>),
    Infinite,
}

impl Slope {
    /// Slope of the root `x`, the valuation of `x`.
    pub fn of(x: &PadicScalar) -> Self {
        if x.is_zero() {
            Slope::Infinite
        } else {
            Slope::Finite(Ratio::from_integer(x.valuation()))
        }
    }

    pub fn at_most(&self, h: Ratio<i64>) -> bool {
        matches!(self, Slope::Finite(s) if *s <= h)
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slope::Finite(r) => write!(f, "{r}"),
            Slope::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Slope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Slopes of the roots with multiplicities, nondecreasing.
pub fn newton_polygon(poly: &PadicPoly) -> Vec<(Slope, usize)> {
    let pts: Vec<(i64, i64)> = poly
        .coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| (i as i64, c.valuation()))
        .collect();
    let Some(&(first, _)) = pts.first() else {
        return vec![(Slope::Infinite, poly.degree())];
    };
    let mut hull: Vec<(i64, i64)> = Vec::new();
    for &pt in &pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // Drop b when it lies on or above the segment a -> pt.
            let cross = (b.0 - a.0) as i128 * (pt.1 - a.1) as i128
                - (b.1 - a.1) as i128 * (pt.0 - a.0) as i128;
            if cross <= 0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let mut out: Vec<(Slope, usize)> = hull
        .windows(2)
        .map(|w| {
            let len = w[1].0 - w[0].0;
            (
                Slope::Finite(Ratio::new(w[0].1 - w[1].1, len)),
                len as usize,
            )
        })
        .collect();
    out.reverse();
    if first > 0 {
        out.push((Slope::Infinite, first as usize));
    }
    out
}

/// Solves `F dG + G dF = R` with `deg dG < deg G`, `deg dF < deg F`.
fn sylvester_solve(f: &PadicPoly, g: &PadicPoly, r: &PadicPoly) -> Result<(PadicPoly, PadicPoly)> {
    let (df, dg) = (f.degree(), g.degree());
    let n = df + dg;
    let p = f.p;
    let mut a = Matrix::zero(p, n, n);
    for j in 0..dg {
        for (i, c) in f.coeffs.iter().enumerate() {
            a.set(i + j, j, *c);
        }
    }
    for j in 0..df {
        for (i, c) in g.coeffs.iter().enumerate() {
            a.set(i + j, dg + j, *c);
        }
    }
    let rhs: Vec<PadicScalar> = (0..n).map(|i| r.coeff(i)).collect();
    let x = solve(&a, &rhs).map_err(|_| Error::InseparableFactors)?;
    Ok((
        PadicPoly::new(p, x[..dg].to_vec()),
        PadicPoly::new(p, x[dg..].to_vec()),
    ))
}

/// Hensel splitting of a lifted polynomial at slope `h`, from the vertex split of its
/// Newton polygon.
fn split_raw(poly: &PadicPoly, h: Ratio<i64>) -> Result<(PadicPoly, PadicPoly)> {
    let p = poly.p;
    let w = max_precision(p);
    let lc = poly.leading();
    if lc.is_zero() {
        return Err(Error::InvalidInput(
            "leading coefficient is zero to precision".into(),
        ));
    }
    let monic = poly.scale(lc.inv()?);
    let d_le: usize = newton_polygon(&monic)
        .iter()
        .filter(|(s, _)| s.at_most(h))
        .map(|(_, l)| l)
        .sum();
    let n = monic.degree();
    let m = n - d_le;
    if d_le == 0 {
        return Ok((PadicPoly::one(p, w), poly.clone()));
    }
    if m == 0 {
        return Ok((monic, PadicPoly::new(p, vec![lc])));
    }
    let cm = monic.coeff(m);
    let mut g =
        PadicPoly::new(p, (0..=m).map(|i| monic.coeff(i)).collect::<Vec<_>>()).scale(cm.inv()?);
    let mut f = PadicPoly::new(p, (m..=n).map(|i| monic.coeff(i)).collect());
    for _ in 0..2 * (w as usize) + 8 {
        let r = monic.sub(&f.mul(&g));
        if r.is_zero() {
            return Ok((f, g.scale(lc)));
        }
        let (dg, df) = sylvester_solve(&f, &g, &r)?;
        g = g.add(&dg);
        f = f.add(&df);
    }
    Err(Error::InseparableFactors)
}

/// `P = P_le P_gt` with `P_le` monic carrying the roots of slope `≤ h`. Coefficients
/// keep the digits that agree across random lifts of `P`.
pub fn slope_factor(poly: &PadicPoly, h: Ratio<i64>) -> Result<(PadicPoly, PadicPoly)> {
    let w = max_precision(poly.p);
    let abs = poly.coeffs.iter().map(|c| c.abs_prec()).min().unwrap();
    let (mut le, mut gt) = split_raw(&poly.lifted(w), h)?;
    let mut prec_le: Vec<i64> = vec![abs; le.coeffs.len()];
    let mut prec_gt: Vec<i64> = vec![abs; gt.coeffs.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..PERTURBATIONS {
        let (ole, ogt) = split_raw(&perturbed_poly(poly, &mut rng), h)?;
        if ole.degree() != le.degree() {
            return Err(Error::InseparableFactors);
        }
        for (prec, (a, b)) in [(&mut prec_le, (&le, &ole)), (&mut prec_gt, (&gt, &ogt))] {
            for (i, slot) in prec.iter_mut().enumerate() {
                let d = a.coeff(i) - b.coeff(i);
                *slot = (*slot).min(if d.is_zero() {
                    d.abs_prec()
                } else {
                    d.valuation()
                });
            }
        }
    }
    let settle = |x: &PadicPoly, prec: &[i64], monic: bool| {
        let d = x.degree();
        PadicPoly::new(
            x.p,
            x.coeffs
                .iter()
                .zip(prec)
                .enumerate()
                .map(|(i, (c, k))| {
                    if monic && i == d {
                        *c
                    } else {
                        c.reduce_abs(*k)
                    }
                })
                .collect(),
        )
    };
    le = settle(&le, &prec_le, true);
    gt = settle(&gt, &prec_gt, false);
    Ok((le, gt))
}

/// `det(X - M)` by Berkowitz's division-free algorithm.
pub fn charpoly(m: &Matrix) -> PadicPoly {
    assert!(m.is_square());
    let p = m.p;
    let size = m.rows;
    let n_prec = m
        .data
        .iter()
        .filter(|x| !x.is_zero())
        .map(|x| x.rel_prec())
        .max()
        .unwrap_or(max_precision(p));
    let one = PadicScalar::one(p, n_prec);
    // Coefficients from the leading term down.
    let mut poly = vec![one];
    for r in 0..size {
        let a = m.get(r, r);
        let row: Vec<PadicScalar> = (0..r).map(|j| m.get(r, j)).collect();
        let mut v: Vec<PadicScalar> = (0..r).map(|i| m.get(i, r)).collect();
        let mut col = vec![one, -a];
        for _ in 0..r {
            let dot = row
                .iter()
                .zip(&v)
                .fold(PadicScalar::zero(p), |acc, (x, y)| acc + *x * *y);
            col.push(-dot);
            v = (0..r)
                .map(|i| (0..r).fold(PadicScalar::zero(p), |acc, j| acc + m.get(i, j) * v[j]))
                .collect();
        }
        let mut next = vec![PadicScalar::zero(p); r + 2];
        for (i, slot) in next.iter_mut().enumerate() {
            for (j, c) in poly.iter().enumerate() {
                if j <= i && i - j < col.len() {
                    *slot += col[i - j] * *c;
                }
            }
        }
        poly = next;
    }
    poly.reverse();
    PadicPoly::new(p, poly)
}

/// Representatives padded with zero digits up to `max_precision(p)` when `noise` is
/// `None`, and with random digits below the known precision otherwise.
fn lifted(m: &Matrix, noise: Option<&mut ChaCha8Rng>) -> Matrix {
    let w = max_precision(m.p);
    let data = match noise {
        None => m.data.iter().map(|x| x.lift(w)).collect(),
        Some(rng) => m.data.iter().map(|x| perturb(x, w, rng)).collect(),
    };
    Matrix { data, ..m.clone() }
}

fn perturb(x: &PadicScalar, w: u32, rng: &mut ChaCha8Rng) -> PadicScalar {
    if x.is_exact_zero() {
        return *x;
    }
    x.lift(w) + PadicScalar::random(rng, x.p(), w, x.abs_prec())
}

fn perturbed_poly(f: &PadicPoly, rng: &mut ChaCha8Rng) -> PadicPoly {
    let w = max_precision(f.p);
    PadicPoly::new(f.p, f.coeffs.iter().map(|c| perturb(c, w, rng)).collect())
}

/// Number of random lifts each projector is recomputed from.
const PERTURBATIONS: usize = 2;

/// Runs `compute` on the zero-padded lift and on random lifts of the input, keeping
/// each entry to the precision on which all runs agree.
fn stable_entries(
    m: &Matrix,
    mut compute: impl FnMut(&Matrix, Option<&mut ChaCha8Rng>) -> Result<Matrix>,
) -> Result<Matrix> {
    let base = compute(&lifted(m, None), None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut prec: Vec<i64> = base.data.iter().map(|x| x.abs_prec()).collect();
    for _ in 0..PERTURBATIONS {
        let other = compute(&lifted(m, Some(&mut rng)), Some(&mut rng))?;
        for (slot, (a, b)) in prec.iter_mut().zip(base.data.iter().zip(&other.data)) {
            let d = *a - *b;
            let agree = if d.is_zero() {
                d.abs_prec()
            } else {
                d.valuation()
            };
            *slot = (*slot).min(agree);
        }
    }
    Ok(Matrix {
        data: base
            .data
            .iter()
            .zip(&prec)
            .map(|(x, k)| x.reduce_abs(*k))
            .collect(),
        ..base
    })
}

/// `B(M) Q(M)` from `A P + B Q = 1`, the projector onto the generalized eigenspace cut
/// out by `P` when `P Q` is the characteristic polynomial.
fn bezout_projector(m: &Matrix, keep: &PadicPoly, other: &PadicPoly) -> Result<Matrix> {
    let size = m.rows;
    let w = max_precision(m.p);
    if other.degree() == 0 {
        return Ok(Matrix::identity(m.p, w, size));
    }
    if keep.degree() == 0 {
        return Ok(Matrix::zero(m.p, size, size));
    }
    let (_, b) = sylvester_solve(keep, other, &PadicPoly::one(m.p, w))?;
    Ok(b.mul(other).eval_matrix(m, w))
}

/// Projector onto the generalized eigenspace of slopes `≤ h`, `e = B(M) P_gt(M)` from
/// `A P_le + B P_gt = 1`. Entries carry the precision stable under random lifts of `M`.
pub fn riesz_projector(m: &Matrix, h: Ratio<i64>) -> Result<Matrix> {
    stable_entries(m, |ml, _| {
        let (le, gt) = split_raw(&charpoly(ml), h)?;
        bezout_projector(ml, &le, &gt)
    })
}

/// Projector onto the generalized eigenspace attached to a monic factor of the
/// characteristic polynomial coprime to its cofactor.
pub fn factor_projector(m: &Matrix, factor: &PadicPoly) -> Result<Matrix> {
    let w = max_precision(m.p);
    let cap = m
        .data
        .iter()
        .chain(&factor.coeffs)
        .map(|c| c.abs_prec())
        .min()
        .unwrap_or(i64::MAX);
    stable_entries(m, |ml, rng| {
        let f = match rng {
            None => factor.lifted(w),
            Some(r) => perturbed_poly(factor, r),
        };
        let (cofactor, rem) = charpoly(ml).div_rem(&f);
        let rem_val = rem
            .coeffs
            .iter()
            .map(|c| if c.is_zero() { i64::MAX } else { c.valuation() })
            .min()
            .unwrap();
        if rem_val < cap {
            return Err(Error::InvalidInput(format!(
                "{factor} does not divide the characteristic polynomial"
            )));
        }
        bezout_projector(ml, &f, &cofactor)
    })
}

/// A vector spanning the kernel of a corank-one matrix, by `n - 1` steps of full-pivot
/// elimination.
fn kernel_vector(a: &Matrix) -> Result<Vec<PadicScalar>> {
    let n = a.cols;
    let mut a = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rank = 0;
    while rank + 1 < n {
        let best = (rank..a.rows)
            .flat_map(|r| (rank..n).map(move |c| (r, c)))
            .filter(|&(r, c)| !a.get(r, c).is_zero())
            .min_by_key(|&(r, c)| a.get(r, c).valuation());
        let Some((r, c)) = best else { break };
        a.swap_rows(rank, r);
        for i in 0..a.rows {
            let (x, y) = (a.get(i, rank), a.get(i, c));
            a.set(i, rank, y);
            a.set(i, c, x);
        }
        perm.swap(rank, c);
        let inv = a.get(rank, rank).inv()?;
        for i in rank + 1..a.rows {
            let f = a.get(i, rank) * inv;
            for j in rank..n {
                let v = a.get(i, j) - f * a.get(rank, j);
                a.set(i, j, v);
            }
        }
        rank += 1;
    }
    if rank + 1 != n {
        return Err(Error::RepeatedRoot);
    }
    let mut y = vec![PadicScalar::zero(a.p); n];
    y[n - 1] = PadicScalar::one(a.p, max_precision(a.p));
    for c in (0..n - 1).rev() {
        let mut acc = PadicScalar::zero(a.p);
        for j in c + 1..n {
            acc -= a.get(c, j) * y[j];
        }
        y[c] = acc.try_div(a.get(c, c))?;
    }
    let mut x = vec![PadicScalar::zero(a.p); n];
    for (i, v) in perm.iter().zip(y) {
        x[*i] = v;
    }
    Ok(x)
}

/// Projector onto the sum of the eigenlines of the given simple eigenvalues, along the
/// remaining generalized eigenspaces: `Σ r ℓ / (ℓ r)` over right and left eigenvectors.
pub fn eigen_projector(m: &Matrix, roots: &[PadicScalar]) -> Result<Matrix> {
    assert!(m.is_square());
    let w = max_precision(m.p);
    stable_entries(m, |ml, mut rng| {
        let n = ml.rows;
        let mut out = Matrix::zero(ml.p, n, n);
        for root in roots {
            let lam = match rng.as_deref_mut() {
                None => root.lift(w),
                Some(r) => perturb(root, w, r),
            };
            let shifted = ml.sub(&Matrix::identity(ml.p, w, n).scale(lam));
            let right = kernel_vector(&shifted)?;
            let left = kernel_vector(&shifted.transpose())?;
            let dot = left
                .iter()
                .zip(&right)
                .fold(PadicScalar::zero(ml.p), |acc, (a, b)| acc + *a * *b);
            if dot.is_zero() {
                return Err(Error::RepeatedRoot);
            }
            let inv = dot.inv()?;
            for i in 0..n {
                for j in 0..n {
                    let v = out.get(i, j) + right[i] * left[j] * inv;
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    })
}

fn working_precision(m: &Matrix) -> u32 {
    m.data
        .iter()
        .filter(|x| !x.is_zero())
        .map(|x| x.rel_prec())
        .max()
        .unwrap_or(max_precision(m.p))
}

/// `lim M^{r!}`, iterated until the power is idempotent modulo the absolute precision
/// of `M`.
pub fn ordinary_projector(m: &Matrix, r_max: u64) -> Result<Matrix> {
    let n_prec = working_precision(m);
    let cap = m
        .data
        .iter()
        .map(|x| x.abs_prec())
        .min()
        .unwrap_or(n_prec as i64);
    let truncate = |x: Matrix| Matrix {
        data: x.data.iter().map(|e| e.reduce_abs(cap)).collect(),
        ..x
    };
    let mut a = truncate(m.clone());
    for r in 2..=r_max {
        a = truncate(a.pow(r, n_prec));
        if a.mul(&a) == a {
            return Ok(a);
        }
    }
    Err(Error::NotConverged(format!(
        "M^(r!) not stationary by r = {r_max}"
    )))
}

/// A square operator with a block filtration, degree `i` spanning block `i`.
#[derive(Clone, Debug)]
pub struct FilteredOperator {
    pub matrix: Matrix,
    pub blocks: Vec<usize>,
    pub label: String,
}

impl FilteredOperator {
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = vec![0];
        for b in &self.blocks {
            out.push(out.last().unwrap() + b);
        }
        out
    }

    pub fn diagonal_block(&self, i: usize) -> Matrix {
        let off = self.offsets();
        self.matrix
            .block(off[i], off[i], self.blocks[i], self.blocks[i])
    }
}

/// Divisibility exponent `max(0, ⌊m/p⌋ - 1)` required of fill in degree `m`.
pub fn fill_exponent(p: u32, m: usize) -> i64 {
    ((m / p as usize) as i64 - 1).max(0)
}

/// Block upper-triangular operator with graded pieces `p^i B_i` and random fill scaled
/// by `p^{max(0, ⌊i/p⌋ - 1)}` in row block `i`.
pub fn synthetic_filtered_u<R: Rng + ?Sized>(
    blocks: &[Matrix],
    n: u32,
    rng: &mut R,
) -> FilteredOperator {
    let p = blocks[0].p;
    let sizes: Vec<usize> = blocks.iter().map(|b| b.rows).collect();
    let total: usize = sizes.iter().sum();
    let mut off = vec![0];
    for s in &sizes {
        off.push(off.last().unwrap() + s);
    }
    let mut mat = Matrix::zero(p, total, total);
    for (i, b) in blocks.iter().enumerate() {
        let scale = PadicScalar::p_power(p, n, i as i64);
        for r in 0..sizes[i] {
            for c in 0..sizes[i] {
                mat.set(off[i] + r, off[i] + c, b.get(r, c) * scale);
            }
            for j in i + 1..blocks.len() {
                for c in 0..sizes[j] {
                    let x = PadicScalar::random(rng, p, n, fill_exponent(p, i));
                    mat.set(off[i] + r, off[j] + c, x);
                }
            }
        }
    }
    FilteredOperator {
        matrix: mat,
        blocks: sizes,
        label: format!("synthetic U, {} blocks", blocks.len()),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FredholmReport {
    pub block_triangular: bool,
    pub graded_scaling: bool,
    pub filtration_divisible: bool,
    pub product_identity: bool,
    /// Minimum valuation of each graded block.
    pub graded_valuations: Vec<i64>,
    pub pass: bool,
}

/// Checks the filtration contract and `det(1 - XF) = Π_i det(1 - p^i X B_i)`.
pub fn check_fredholm_factorization(op: &FilteredOperator) -> FredholmReport {
    let p = op.matrix.p;
    let off = op.offsets();
    let k = op.blocks.len();
    let mut block_triangular = true;
    let mut filtration_divisible = true;
    for i in 0..k {
        for j in 0..k {
            let b = op.matrix.block(off[i], off[j], op.blocks[i], op.blocks[j]);
            match i.cmp(&j) {
                Ordering::Greater => block_triangular &= b.is_zero(),
                Ordering::Less => {
                    filtration_divisible &= b.is_zero() || b.valuation() >= fill_exponent(p, i)
                }
                Ordering::Equal => {}
            }
        }
    }
    let graded: Vec<Matrix> = (0..k).map(|i| op.diagonal_block(i)).collect();
    let graded_valuations: Vec<i64> = graded.iter().map(|b| b.valuation()).collect();
    let graded_scaling = graded_valuations
        .iter()
        .enumerate()
        .all(|(i, v)| *v >= i as i64);
    let lhs = charpoly(&op.matrix).reverse();
    let n_prec = lhs.coeff(0).rel_prec().max(1);
    let rhs = graded.iter().fold(PadicPoly::one(p, n_prec), |acc, d| {
        acc.mul(&charpoly(d).reverse())
    });
    let product_identity = lhs == rhs;
    FredholmReport {
        block_triangular,
        graded_scaling,
        filtration_divisible,
        product_identity,
        graded_valuations,
        pass: block_triangular && graded_scaling && filtration_divisible && product_identity,
    }
}
