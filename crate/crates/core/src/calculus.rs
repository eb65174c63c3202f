//! Operator calculus on the model space `C^n` with the Gaussian kernel
//!
//! ```text
//! P(Z, Z') = exp(-pi/2 * sum_i (|z_i|^2 + |z'_i|^2 - 2 z_i conj(z'_i)))
//! ```
//!
//! and the operators `b_i = -2 d/dz_i + pi conj(z_i)`,
//! `b+_i = 2 d/dconj(z_i) + pi z_i`, acting in the `Z` variable. The relevant
//! relations are
//!
//! * `[b_i, z_j] = -2 delta_ij`, `[b+_i, b_j] = 4 pi delta_ij`,
//! * `b+_i P = 0` and `b_i P = 2 pi (conj(z_i) - conj(z'_i)) P`,
//!
//! so that `L = sum_i b_i b+_i` acts on `b^a z^b P` with eigenvalue
//! `4 pi |a|` whenever the coordinate factor is holomorphic in `Z`.
//!
//! Kernels of the form `sum c * b^a z^b z'^g conj(z')^d * P` are kept in that
//! normal form ([`NormalOrderedKernel`]); [`resolve_against_p`] expands the
//! `b` factors into an [`OffDiagPolynomial`] times `P`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand::RngExt;

use crate::error::{Error, Result};
use crate::tensor::{rational, CurvatureData, TensorScalar};

/// The four families of coordinate variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Z,
    ZBar,
    ZPrime,
    ZPrimeBar,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::Z, Var::ZBar, Var::ZPrime, Var::ZPrimeBar];

    fn slot(self) -> usize {
        match self {
            Var::Z => 0,
            Var::ZBar => 1,
            Var::ZPrime => 2,
            Var::ZPrimeBar => 3,
        }
    }
}

/// Exponent vector of `z^a conj(z)^b z'^c conj(z')^d`, stored as one
/// contiguous block of length `4n` in that order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    exps: Vec<u8>,
}

impl Monomial {
    pub fn one(n: usize) -> Self {
        Self {
            exps: vec![0; 4 * n],
        }
    }

    /// The single variable `var_i` (1-based index).
    pub fn var(n: usize, var: Var, i: usize) -> Result<Self> {
        check_range(i, n)?;
        let mut m = Self::one(n);
        m.exps[var.slot() * n + i - 1] = 1;
        Ok(m)
    }

    pub fn from_parts(z: &[u8], zbar: &[u8], zp: &[u8], zpbar: &[u8]) -> Result<Self> {
        let n = z.len();
        for part in [zbar, zp, zpbar] {
            if part.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: part.len(),
                });
            }
        }
        Ok(Self {
            exps: [z, zbar, zp, zpbar].concat(),
        })
    }

    pub fn dim(&self) -> usize {
        self.exps.len() / 4
    }

    pub fn part(&self, var: Var) -> &[u8] {
        let n = self.dim();
        &self.exps[var.slot() * n..(var.slot() + 1) * n]
    }

    pub fn exponent(&self, var: Var, i: usize) -> u8 {
        self.exps[var.slot() * self.dim() + i - 1]
    }

    fn exponent_mut(&mut self, var: Var, i: usize) -> &mut u8 {
        let n = self.dim();
        &mut self.exps[var.slot() * n + i - 1]
    }

    pub fn degree(&self) -> usize {
        self.exps.iter().map(|&e| e as usize).sum()
    }

    pub fn degree_in(&self, var: Var) -> usize {
        self.part(var).iter().map(|&e| e as usize).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Image under `T(Z, Z') -> conj(T(Z', Z))`:
    /// `z^a zb^b z'^c zb'^d -> zb'^a z'^b zb^c z^d`.
    pub fn adjoint(&self) -> Monomial {
        Monomial {
            exps: [
                self.part(Var::ZPrimeBar),
                self.part(Var::ZPrime),
                self.part(Var::ZBar),
                self.part(Var::Z),
            ]
            .concat(),
        }
    }

    pub fn evaluate(&self, z: &[Complex64], zp: &[Complex64]) -> Complex64 {
        let mut v = Complex64::new(1.0, 0.0);
        for i in 1..=self.dim() {
            let (zi, zpi) = (z[i - 1], zp[i - 1]);
            for (var, base) in [
                (Var::Z, zi),
                (Var::ZBar, zi.conj()),
                (Var::ZPrime, zpi),
                (Var::ZPrimeBar, zpi.conj()),
            ] {
                let e = self.exponent(var, i);
                if e > 0 {
                    v *= base.powu(e as u32);
                }
            }
        }
        v
    }

    fn render_parts(&self) -> String {
        Var::ALL
            .iter()
            .map(|&v| {
                self.part(v)
                    .iter()
                    .map(|e| e.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

fn check_range(i: usize, n: usize) -> Result<()> {
    if i == 0 || i > n {
        Err(Error::IndexOutOfRange { index: i, n })
    } else {
        Ok(())
    }
}

/// Complex coordinates `z_j = Z_{2j-1} + i Z_{2j}` of a real `2n`-vector.
pub fn complex_coords(real: &[f64]) -> Vec<Complex64> {
    real.chunks(2)
        .map(|c| Complex64::new(c[0], *c.get(1).unwrap_or(&0.0)))
        .collect()
}

/// Evaluator for the model Gaussian `P(Z, Z')` on `R^{2n} x R^{2n}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelGaussian {
    pub n: usize,
}

impl ModelGaussian {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn value(&self, z_real: &[f64], zp_real: &[f64]) -> Result<Complex64> {
        check_real_dims(self.n, z_real, zp_real)?;
        Ok(model_gaussian(
            &complex_coords(z_real),
            &complex_coords(zp_real),
        ))
    }
}

pub fn model_gaussian(z: &[Complex64], zp: &[Complex64]) -> Complex64 {
    let exponent: Complex64 = z
        .iter()
        .zip(zp)
        .map(|(a, b)| a.norm_sqr() + b.norm_sqr() - 2.0 * a * b.conj())
        .sum();
    (-std::f64::consts::FRAC_PI_2 * exponent).exp()
}

fn check_real_dims(n: usize, z: &[f64], zp: &[f64]) -> Result<()> {
    for v in [z, zp] {
        if v.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                found: v.len(),
            });
        }
    }
    Ok(())
}

/// Polynomial in `z, conj(z), z', conj(z')` with exact tensor coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OffDiagPolynomial {
    n: usize,
    terms: BTreeMap<Monomial, TensorScalar>,
}

impl OffDiagPolynomial {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: TensorScalar) -> Self {
        Self::monomial(Monomial::one(n), c)
    }

    pub fn monomial(m: Monomial, c: TensorScalar) -> Self {
        let mut out = Self::zero(m.dim());
        out.add_term(m, &c);
        out
    }

    /// `var_i` with coefficient 1.
    pub fn var(n: usize, var: Var, i: usize) -> Result<Self> {
        Ok(Self::monomial(
            Monomial::var(n, var, i)?,
            TensorScalar::one(),
        ))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add_term(&mut self, m: Monomial, c: &TensorScalar) {
        debug_assert_eq!(m.dim(), self.n);
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(m.clone()).or_default();
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &TensorScalar)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> TensorScalar {
        self.terms.get(m).cloned().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn constant_term(&self) -> TensorScalar {
        self.coefficient(&Monomial::one(self.n))
    }

    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(Monomial::degree).max()
    }

    /// Terms of total degree exactly `d`.
    pub fn homogeneous_part(&self, d: usize) -> Self {
        self.filter(|m, _| m.degree() == d)
    }

    fn filter(&self, keep: impl Fn(&Monomial, &TensorScalar) -> bool) -> Self {
        Self {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(m, c)| keep(m, c))
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn map_coefficients(&self, f: impl Fn(&TensorScalar) -> TensorScalar) -> Self {
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), &f(c));
        }
        out
    }

    pub fn scale(&self, c: &TensorScalar) -> Result<Self> {
        let mut out = Self::zero(self.n);
        for (m, v) in &self.terms {
            out.add_term(m.clone(), &v.try_mul(c)?);
        }
        Ok(out)
    }

    /// Coefficient-wise product with a purely rational scalar times `pi^k`.
    pub fn scale_rational(&self, num: i64, den: i64, pi_exp: i32) -> Self {
        let r = rational(num, den);
        self.map_coefficients(|c| c.scale(&r).times_pi(pi_exp))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        let mut out = Self::zero(self.n);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), &ca.try_mul(cb)?);
            }
        }
        Ok(out)
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Self {
        let mut out = Self::zero(self.n);
        for (ma, c) in &self.terms {
            out.add_term(ma.mul(m), c);
        }
        out
    }

    /// Partial derivative in `var_i`.
    pub fn derivative(&self, var: Var, i: usize) -> Self {
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            let e = m.exponent(var, i);
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            *dm.exponent_mut(var, i) -= 1;
            out.add_term(dm, &c.scale_int(e as i64));
        }
        out
    }

    /// Kernel adjoint `T*(Z, Z') = conj(T(Z', Z))` of `self * P`, expressed
    /// on the polynomial factor (the Gaussian is self-adjoint).
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            out.add_term(m.adjoint(), &c.conjugate());
        }
        out
    }

    pub fn conjugate_coefficients(&self) -> Self {
        self.map_coefficients(TensorScalar::conjugate)
    }

    pub fn drop_bundle_terms(&self) -> Self {
        self.map_coefficients(TensorScalar::drop_bundle_terms)
    }

    /// Numerical value at real points `Z`, `Z'` (each of length `2n`), times
    /// `P(Z, Z')` when `with_gaussian` is set.
    pub fn evaluate(
        &self,
        data: &CurvatureData,
        z_real: &[f64],
        zp_real: &[f64],
        with_gaussian: bool,
    ) -> Result<Complex64> {
        if data.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: data.dim(),
            });
        }
        check_real_dims(self.n, z_real, zp_real)?;
        let z = complex_coords(z_real);
        let zp = complex_coords(zp_real);
        let mut total = Complex64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            total += c.substitute(data, std::f64::consts::PI)? * m.evaluate(&z, &zp);
        }
        if with_gaussian {
            total *= model_gaussian(&z, &zp);
        }
        Ok(total)
    }

    /// One line per term: `coeff | z-exps | zbar-exps | z'-exps | zbar'-exps`.
    pub fn render_golden(&self) -> String {
        let mut out = String::new();
        for (m, c) in &self.terms {
            let _ = writeln!(out, "{} | {}", c, m.render_parts());
        }
        out
    }
}

impl Add for &OffDiagPolynomial {
    type Output = OffDiagPolynomial;
    fn add(self, rhs: &OffDiagPolynomial) -> OffDiagPolynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c);
        }
        out
    }
}

impl Add for OffDiagPolynomial {
    type Output = OffDiagPolynomial;
    fn add(self, rhs: OffDiagPolynomial) -> OffDiagPolynomial {
        &self + &rhs
    }
}

impl Neg for &OffDiagPolynomial {
    type Output = OffDiagPolynomial;
    fn neg(self) -> OffDiagPolynomial {
        self.map_coefficients(|c| -c)
    }
}

impl Neg for OffDiagPolynomial {
    type Output = OffDiagPolynomial;
    fn neg(self) -> OffDiagPolynomial {
        -&self
    }
}

impl Sub for &OffDiagPolynomial {
    type Output = OffDiagPolynomial;
    fn sub(self, rhs: &OffDiagPolynomial) -> OffDiagPolynomial {
        self + &(-rhs)
    }
}

impl Sub for OffDiagPolynomial {
    type Output = OffDiagPolynomial;
    fn sub(self, rhs: OffDiagPolynomial) -> OffDiagPolynomial {
        &self - &rhs
    }
}

/// Panics on products of two bundle symbols; see [`OffDiagPolynomial::try_mul`].
impl Mul for &OffDiagPolynomial {
    type Output = OffDiagPolynomial;
    fn mul(self, rhs: &OffDiagPolynomial) -> OffDiagPolynomial {
        self.try_mul(rhs)
            .expect("product of two bundle curvature symbols")
    }
}

impl Mul for OffDiagPolynomial {
    type Output = OffDiagPolynomial;
    fn mul(self, rhs: OffDiagPolynomial) -> OffDiagPolynomial {
        &self * &rhs
    }
}

/// `Q' ` with `b_i (Q P) = Q' P`, i.e. `Q' = -2 dQ/dz_i + 2 pi (zb_i - zb'_i) Q`.
pub fn b_action(i: usize, q: &OffDiagPolynomial) -> Result<OffDiagPolynomial> {
    let n = q.dim();
    let shift =
        &OffDiagPolynomial::var(n, Var::ZBar, i)? - &OffDiagPolynomial::var(n, Var::ZPrimeBar, i)?;
    let d = q.derivative(Var::Z, i).scale_rational(-2, 1, 0);
    Ok(&d + &(&shift * q).scale_rational(2, 1, 1))
}

/// `Q'` with `b+_i (Q P) = Q' P`, i.e. `Q' = 2 dQ/dzb_i`.
pub fn b_plus_action(i: usize, q: &OffDiagPolynomial) -> Result<OffDiagPolynomial> {
    check_range(i, q.dim())?;
    Ok(q.derivative(Var::ZBar, i).scale_rational(2, 1, 0))
}

/// Letters of operator words acting on the Gaussian. Indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    B(usize),
    BPlus(usize),
    Z(usize),
    ZPrime(usize),
    ZPrimeBar(usize),
}

impl Letter {
    fn index(self) -> usize {
        match self {
            Letter::B(i)
            | Letter::BPlus(i)
            | Letter::Z(i)
            | Letter::ZPrime(i)
            | Letter::ZPrimeBar(i) => i,
        }
    }

    fn is_coordinate(self) -> bool {
        matches!(
            self,
            Letter::Z(_) | Letter::ZPrime(_) | Letter::ZPrimeBar(_)
        )
    }
}

/// Key of a normal-ordered term `b^alpha * (z, z', zb' monomial)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KernelMonomial {
    pub b: Vec<u8>,
    pub coords: Monomial,
}

impl KernelMonomial {
    pub fn one(n: usize) -> Self {
        Self {
            b: vec![0; n],
            coords: Monomial::one(n),
        }
    }

    pub fn b_degree(&self) -> usize {
        self.b.iter().map(|&e| e as usize).sum()
    }
}

/// `sum c * b^alpha z^beta z'^gamma zb'^delta * P` in normal form: all `b`
/// factors stand to the left and no `conj(z)` appears.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalOrderedKernel {
    n: usize,
    terms: BTreeMap<KernelMonomial, TensorScalar>,
}

impl NormalOrderedKernel {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    /// The Gaussian itself.
    pub fn gaussian(n: usize) -> Self {
        let mut k = Self::zero(n);
        k.add_term(KernelMonomial::one(n), &TensorScalar::one());
        k
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add_term(&mut self, key: KernelMonomial, c: &TensorScalar) {
        debug_assert_eq!(key.coords.degree_in(Var::ZBar), 0);
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(key.clone()).or_default();
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&KernelMonomial, &TensorScalar)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn map_coefficients(&self, f: impl Fn(&TensorScalar) -> TensorScalar) -> Self {
        let mut out = Self::zero(self.n);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), &f(c));
        }
        out
    }

    pub fn scale(&self, c: &TensorScalar) -> Result<Self> {
        let mut out = Self::zero(self.n);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), &v.try_mul(c)?);
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.map_coefficients(|c| -c))
    }

    /// Left multiplication by `b_i`. The `b`'s commute among themselves, so
    /// the normal form only gains one `b_i`.
    pub fn apply_b(&self, i: usize) -> Result<Self> {
        self.left_multiply(Letter::B(i))
    }

    /// Left multiplication by `b+_i`, using `b+_i b_i^a = b_i^a b+_i + 4 pi a
    /// b_i^(a-1)` and `b+_i (holomorphic) P = 0`.
    pub fn apply_b_plus(&self, i: usize) -> Result<Self> {
        self.left_multiply(Letter::BPlus(i))
    }

    /// Left multiplication by a coordinate; `z_j` is moved past the `b`'s with
    /// `z_j b_j^a = b_j^a z_j + 2 a b_j^(a-1)`.
    pub fn multiply_coordinate(&self, letter: Letter) -> Result<Self> {
        if !letter.is_coordinate() {
            return Err(Error::Schema(format!("{letter:?} is not a coordinate")));
        }
        self.left_multiply(letter)
    }

    /// Left multiplication by one letter, followed by normal ordering.
    pub fn left_multiply(&self, letter: Letter) -> Result<Self> {
        let n = self.n;
        check_range(letter.index(), n)?;
        let i = letter.index();
        let mut out = Self::zero(n);
        for (key, c) in &self.terms {
            match letter {
                Letter::B(_) => {
                    let mut k = key.clone();
                    k.b[i - 1] += 1;
                    out.add_term(k, c);
                }
                Letter::BPlus(_) => {
                    let a = key.b[i - 1];
                    if a > 0 {
                        let mut k = key.clone();
                        k.b[i - 1] -= 1;
                        out.add_term(k, &c.scale_int(4 * a as i64).times_pi(1));
                    }
                }
                Letter::Z(_) => {
                    let mut k = key.clone();
                    *k.coords.exponent_mut(Var::Z, i) += 1;
                    out.add_term(k, c);
                    let a = key.b[i - 1];
                    if a > 0 {
                        let mut k = key.clone();
                        k.b[i - 1] -= 1;
                        out.add_term(k, &c.scale_int(2 * a as i64));
                    }
                }
                Letter::ZPrime(_) | Letter::ZPrimeBar(_) => {
                    let var = if matches!(letter, Letter::ZPrime(_)) {
                        Var::ZPrime
                    } else {
                        Var::ZPrimeBar
                    };
                    let mut k = key.clone();
                    *k.coords.exponent_mut(var, i) += 1;
                    out.add_term(k, c);
                }
            }
        }
        Ok(out)
    }

    /// `L = sum_i b_i b+_i` applied on the left.
    pub fn apply_l(&self) -> Result<Self> {
        let mut out = Self::zero(self.n);
        for i in 1..=self.n {
            out = out.add(&self.apply_b_plus(i)?.apply_b(i)?);
        }
        Ok(out)
    }

    /// `L^{-1}` on the orthogonal complement of `ker L`: drops `alpha = 0`
    /// terms and divides the rest by their eigenvalue `4 pi |alpha|`.
    pub fn inverse_l_on_complement(&self) -> Self {
        let mut out = Self::zero(self.n);
        for (key, c) in &self.terms {
            let a = key.b_degree();
            if a == 0 {
                continue;
            }
            out.add_term(
                key.clone(),
                &c.scale(&rational(1, 4 * a as i64)).times_pi(-1),
            );
        }
        out
    }

    /// The part lying in `ker L` (terms without `b` factors).
    pub fn kernel_projection(&self) -> Self {
        let mut out = Self::zero(self.n);
        for (key, c) in &self.terms {
            if key.b_degree() == 0 {
                out.add_term(key.clone(), c);
            }
        }
        out
    }
}

/// Expands every `b` factor against the Gaussian and returns `Q` with
/// `K = Q * P`.
pub fn resolve_against_p(kernel: &NormalOrderedKernel) -> Result<OffDiagPolynomial> {
    let n = kernel.dim();
    let mut out = OffDiagPolynomial::zero(n);
    for (key, c) in kernel.terms() {
        let mut q = OffDiagPolynomial::monomial(key.coords.clone(), c.clone());
        for i in 1..=n {
            for _ in 0..key.b[i - 1] {
                q = b_action(i, &q)?;
            }
        }
        out = &out + &q;
    }
    Ok(out)
}

/// A word `l_1 l_2 ... l_k` with coefficient, acting on the Gaussian.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorWord {
    pub letters: Vec<Letter>,
    pub coefficient: TensorScalar,
}

impl OperatorWord {
    pub fn new(letters: Vec<Letter>, coefficient: TensorScalar) -> Self {
        Self {
            letters,
            coefficient,
        }
    }

    /// Normal form of `word * P`, applying letters right to left.
    pub fn apply_to_gaussian(&self, n: usize) -> Result<NormalOrderedKernel> {
        let mut k = NormalOrderedKernel::gaussian(n).scale(&self.coefficient)?;
        for &l in self.letters.iter().rev() {
            k = k.left_multiply(l)?;
        }
        Ok(k)
    }
}

/// Rewrites the words into normal form by repeatedly resolving one adjacent
/// out-of-order pair, chosen by `choose` among all currently available
/// rewrite sites (`choose(count)` must return an index below `count`).
///
/// Rules: `z_j b_i -> b_i z_j + 2 delta_ij`, `z' b -> b z'`,
/// `b+_i b_j -> b_j b+_i + 4 pi delta_ij`, `b+ x -> x b+` for coordinates
/// `x`, and a trailing `b+` annihilates `P`.
pub fn normal_order_words(
    n: usize,
    words: &[OperatorWord],
    mut choose: impl FnMut(usize) -> usize,
) -> Result<NormalOrderedKernel> {
    let mut pending: Vec<(Vec<Letter>, TensorScalar)> = Vec::new();
    for w in words {
        for &l in &w.letters {
            check_range(l.index(), n)?;
        }
        pending.push((w.letters.clone(), w.coefficient.clone()));
    }
    let mut out = NormalOrderedKernel::zero(n);
    loop {
        // rewrite sites: (word index, position); position == len means a
        // trailing b+
        let mut sites = Vec::new();
        for (wi, (letters, _)) in pending.iter().enumerate() {
            for pos in 0..letters.len() {
                let here = letters[pos];
                let next = letters.get(pos + 1).copied();
                let site = match (here, next) {
                    (Letter::BPlus(_), None) => true,
                    (Letter::BPlus(_), Some(Letter::BPlus(_))) => false,
                    (Letter::BPlus(_), Some(_)) => true,
                    (x, Some(Letter::B(_))) if x.is_coordinate() => true,
                    _ => false,
                };
                if site {
                    sites.push((wi, pos));
                }
            }
        }
        if sites.is_empty() {
            break;
        }
        let (wi, pos) = sites[choose(sites.len())];
        let (letters, coeff) = pending.swap_remove(wi);
        let here = letters[pos];
        match letters.get(pos + 1).copied() {
            None => {} // b+ P = 0
            Some(next) => {
                let mut swapped = letters.clone();
                swapped.swap(pos, pos + 1);
                let commutator = match (here, next) {
                    (Letter::Z(j), Letter::B(i)) if i == j => Some(TensorScalar::ratio(2, 1)),
                    (Letter::BPlus(i), Letter::B(j)) if i == j => {
                        Some(TensorScalar::ratio(4, 1).times_pi(1))
                    }
                    _ => None,
                };
                if let Some(c) = commutator {
                    let mut shorter = letters.clone();
                    shorter.drain(pos..pos + 2);
                    pending.push((shorter, coeff.try_mul(&c)?));
                }
                pending.push((swapped, coeff));
            }
        }
    }
    for (letters, coeff) in pending {
        let mut key = KernelMonomial::one(n);
        for l in letters {
            match l {
                Letter::B(i) => key.b[i - 1] += 1,
                Letter::Z(i) => *key.coords.exponent_mut(Var::Z, i) += 1,
                Letter::ZPrime(i) => *key.coords.exponent_mut(Var::ZPrime, i) += 1,
                Letter::ZPrimeBar(i) => *key.coords.exponent_mut(Var::ZPrimeBar, i) += 1,
                Letter::BPlus(_) => unreachable!("b+ left after normal ordering"),
            }
        }
        out.add_term(key, &coeff);
    }
    Ok(out)
}

/// [`normal_order_words`] with rewrite sites picked uniformly at random.
pub fn normal_order_words_random<R: Rng + ?Sized>(
    n: usize,
    words: &[OperatorWord],
    rng: &mut R,
) -> Result<NormalOrderedKernel> {
    normal_order_words(n, words, |count| rng.random_range(0..count))
}
