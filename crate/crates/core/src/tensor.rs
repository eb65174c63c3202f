//! Exact scalar coefficients for the symbolic calculus.
//!
//! A [`TensorScalar`] is a finite sum of terms `c * pi^k * S_1 * ... * S_j`
//! where `c` is an arbitrary-precision rational, `k` an integer and the `S_i`
//! are curvature symbols: components `R(k,m,l,q)` of the Kähler curvature
//! tensor (first and third index holomorphic, second and fourth
//! antiholomorphic) and components `RE(l,q)` of the curvature of the
//! auxiliary bundle. Riemann symbols are always stored in canonical form, so
//! two scalars are equal iff their term maps are equal.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    Riemann,
    BundleE,
}

/// A single curvature component. Indices are 1-based.
///
/// For [`SymbolKind::BundleE`] only the first two index slots are used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TensorSymbol {
    kind: SymbolKind,
    indices: [u8; 4],
    n: u8,
}

fn check_index(index: usize, n: usize) -> Result<u8> {
    if index == 0 || index > n || n > u8::MAX as usize {
        return Err(Error::IndexOutOfRange { index, n });
    }
    Ok(index as u8)
}

impl TensorSymbol {
    /// `R(k, m̄, l, q̄)` in canonical form.
    pub fn riemann(n: usize, k: usize, m: usize, l: usize, q: usize) -> Result<Self> {
        Ok(Self::riemann_raw(n, k, m, l, q)?.canonicalize())
    }

    /// `R(k, m̄, l, q̄)` exactly as given, without canonicalization.
    pub fn riemann_raw(n: usize, k: usize, m: usize, l: usize, q: usize) -> Result<Self> {
        let indices = [
            check_index(k, n)?,
            check_index(m, n)?,
            check_index(l, n)?,
            check_index(q, n)?,
        ];
        Ok(Self {
            kind: SymbolKind::Riemann,
            indices,
            n: n as u8,
        })
    }

    /// `RE(l, q̄)`.
    pub fn bundle(n: usize, l: usize, q: usize) -> Result<Self> {
        Ok(Self {
            kind: SymbolKind::BundleE,
            indices: [check_index(l, n)?, check_index(q, n)?, 0, 0],
            n: n as u8,
        })
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n as usize
    }

    /// The 1-based indices (two for bundle symbols, four for Riemann).
    pub fn indices(&self) -> &[u8] {
        match self.kind {
            SymbolKind::Riemann => &self.indices,
            SymbolKind::BundleE => &self.indices[..2],
        }
    }

    /// The four images of a Riemann symbol under swapping the holomorphic
    /// pair and/or the antiholomorphic pair.
    pub fn orbit(&self) -> Vec<TensorSymbol> {
        match self.kind {
            SymbolKind::BundleE => vec![*self],
            SymbolKind::Riemann => {
                let [k, m, l, q] = self.indices;
                [[k, m, l, q], [l, m, k, q], [k, q, l, m], [l, q, k, m]]
                    .into_iter()
                    .map(|indices| TensorSymbol { indices, ..*self })
                    .collect()
            }
        }
    }

    /// Lexicographically least member of the symmetry orbit.
    pub fn canonicalize(&self) -> Self {
        match self.kind {
            SymbolKind::BundleE => *self,
            SymbolKind::Riemann => {
                let [k, m, l, q] = self.indices;
                let (a, b) = if k <= l { (k, l) } else { (l, k) };
                let (c, d) = if m <= q { (m, q) } else { (q, m) };
                TensorSymbol {
                    indices: [a, c, b, d],
                    ..*self
                }
            }
        }
    }

    /// Complex conjugate: `R(k,m,l,q) -> R(m,k,q,l)` and `RE(l,q) -> RE(q,l)`.
    pub fn conjugate(&self) -> Self {
        let [a, b, c, d] = self.indices;
        match self.kind {
            SymbolKind::Riemann => TensorSymbol {
                indices: [b, a, d, c],
                ..*self
            }
            .canonicalize(),
            SymbolKind::BundleE => TensorSymbol {
                indices: [b, a, 0, 0],
                ..*self
            },
        }
    }

    fn substitute(&self, data: &CurvatureData) -> Complex64 {
        let ix: Vec<usize> = self.indices().iter().map(|&i| i as usize).collect();
        match self.kind {
            SymbolKind::Riemann => data.riemann(ix[0], ix[1], ix[2], ix[3]),
            SymbolKind::BundleE => data.bundle(ix[0], ix[1]),
        }
    }
}

impl fmt::Display for TensorSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            SymbolKind::Riemann => "R",
            SymbolKind::BundleE => "RE",
        };
        let ix: Vec<String> = self.indices().iter().map(|i| i.to_string()).collect();
        write!(f, "{}({})", name, ix.join(","))
    }
}

/// Key of one term: power of π and the sorted multiset of symbols.
pub type TermKey = (i32, Vec<TensorSymbol>);

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TensorScalar {
    terms: BTreeMap<TermKey, BigRational>,
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl TensorScalar {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_rational(BigRational::one())
    }

    pub fn from_rational(c: BigRational) -> Self {
        Self::term(c, 0, Vec::new())
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Self::from_rational(rational(num, den))
    }

    pub fn symbol(sym: TensorSymbol) -> Self {
        Self::term(BigRational::one(), 0, vec![sym])
    }

    /// A single term `c * pi^pi_exp * symbols`. Riemann symbols are
    /// canonicalized on the way in.
    pub fn term(c: BigRational, pi_exp: i32, symbols: Vec<TensorSymbol>) -> Self {
        let mut out = Self::zero();
        out.add_term(pi_exp, symbols, c);
        out
    }

    fn add_term(&mut self, pi_exp: i32, mut symbols: Vec<TensorSymbol>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        for s in symbols.iter_mut() {
            *s = s.canonicalize();
        }
        symbols.sort_unstable();
        let key = (pi_exp, symbols);
        let slot = self
            .terms
            .entry(key.clone())
            .or_insert_with(BigRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TermKey, &BigRational)> {
        self.terms.iter()
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    pub fn scale_int(&self, c: i64) -> Self {
        self.scale(&rational(c, 1))
    }

    /// Multiply by `pi^k`.
    pub fn times_pi(&self, k: i32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|((e, syms), v)| ((e + k, syms.clone()), v.clone()))
                .collect(),
        }
    }

    /// Product of two scalars. Fails if a product monomial would contain two
    /// bundle symbols.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        let mut out = Self::zero();
        for ((ea, sa), ca) in &self.terms {
            for ((eb, sb), cb) in &other.terms {
                let mut syms = sa.clone();
                syms.extend_from_slice(sb);
                let bundles = syms
                    .iter()
                    .filter(|s| s.kind == SymbolKind::BundleE)
                    .count();
                if bundles > 1 {
                    return Err(Error::BundleProduct);
                }
                out.add_term(ea + eb, syms, ca * cb);
            }
        }
        Ok(out)
    }

    pub fn conjugate(&self) -> Self {
        let mut out = Self::zero();
        for ((e, syms), c) in &self.terms {
            let conj: Vec<TensorSymbol> = syms.iter().map(TensorSymbol::conjugate).collect();
            out.add_term(*e, conj, c.clone());
        }
        out
    }

    pub fn has_bundle(&self) -> bool {
        self.terms
            .keys()
            .any(|(_, syms)| syms.iter().any(|s| s.kind == SymbolKind::BundleE))
    }

    /// The scalar with every bundle curvature symbol set to zero.
    pub fn drop_bundle_terms(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|((_, syms), _)| syms.iter().all(|s| s.kind != SymbolKind::BundleE))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Dimension shared by the symbols, if any symbol is present.
    pub fn dim(&self) -> Option<usize> {
        self.terms
            .keys()
            .flat_map(|(_, syms)| syms.first())
            .map(TensorSymbol::dim)
            .next()
    }

    /// Numerical value with the symbols replaced by `data` and π by `pi_value`.
    pub fn substitute(&self, data: &CurvatureData, pi_value: f64) -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for ((e, syms), c) in &self.terms {
            let mut value = Complex64::new(rational_to_f64(c) * pi_value.powi(*e), 0.0);
            for s in syms {
                if s.dim() != data.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: data.dim(),
                        found: s.dim(),
                    });
                }
                value *= s.substitute(data);
            }
            total += value;
        }
        Ok(total)
    }
}

pub(crate) fn rational_to_f64(c: &BigRational) -> f64 {
    match (c.numer().to_f64(), c.denom().to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        // huge numerators/denominators: fall back on the scaled quotient
        _ => {
            let scale = BigInt::from(10u64).pow(30);
            let q = (c * BigRational::from_integer(scale.clone())).to_integer();
            q.to_f64().unwrap_or(f64::NAN) / 1e30
        }
    }
}

impl fmt::Display for TensorScalar {
    /// Renders terms as `a/b*pi^k*R(k,m,l,q)*...`, sorted by π power and
    /// then by symbol monomial, joined by ` + `.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((e, syms), c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let sign = if c.is_negative() { "-" } else { "" };
            write!(f, "{}{}/{}*pi^{}", sign, c.numer().abs(), c.denom(), e)?;
            for s in syms {
                write!(f, "*{}", s)?;
            }
        }
        Ok(())
    }
}

impl Add for &TensorScalar {
    type Output = TensorScalar;
    fn add(self, rhs: &TensorScalar) -> TensorScalar {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for TensorScalar {
    type Output = TensorScalar;
    fn add(mut self, rhs: TensorScalar) -> TensorScalar {
        self += &rhs;
        self
    }
}

impl AddAssign<&TensorScalar> for TensorScalar {
    fn add_assign(&mut self, rhs: &TensorScalar) {
        for ((e, syms), c) in &rhs.terms {
            self.add_term(*e, syms.clone(), c.clone());
        }
    }
}

impl SubAssign<&TensorScalar> for TensorScalar {
    fn sub_assign(&mut self, rhs: &TensorScalar) {
        for ((e, syms), c) in &rhs.terms {
            self.add_term(*e, syms.clone(), -c.clone());
        }
    }
}

impl Sub for &TensorScalar {
    type Output = TensorScalar;
    fn sub(self, rhs: &TensorScalar) -> TensorScalar {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Sub for TensorScalar {
    type Output = TensorScalar;
    fn sub(mut self, rhs: TensorScalar) -> TensorScalar {
        self -= &rhs;
        self
    }
}

impl Neg for &TensorScalar {
    type Output = TensorScalar;
    fn neg(self) -> TensorScalar {
        TensorScalar {
            terms: self.terms.iter().map(|(k, v)| (k.clone(), -v)).collect(),
        }
    }
}

impl Neg for TensorScalar {
    type Output = TensorScalar;
    fn neg(self) -> TensorScalar {
        -&self
    }
}

/// Panics when both factors carry bundle symbols; use [`TensorScalar::try_mul`]
/// where that can happen.
impl Mul for &TensorScalar {
    type Output = TensorScalar;
    fn mul(self, rhs: &TensorScalar) -> TensorScalar {
        self.try_mul(rhs)
            .expect("product of two bundle curvature symbols")
    }
}

impl Mul for TensorScalar {
    type Output = TensorScalar;
    fn mul(self, rhs: TensorScalar) -> TensorScalar {
        &self * &rhs
    }
}

/// Numerical curvature at a point: `R[k][m][l][q]` and `RE[l][q]`, stored
/// flat and indexed 1-based through the accessors.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureData {
    n: usize,
    r: Vec<Complex64>,
    re: Vec<Complex64>,
}

const SYMMETRY_TOL: f64 = 1e-9;

impl CurvatureData {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            r: vec![Complex64::new(0.0, 0.0); n.pow(4)],
            re: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    /// Validates the Kähler symmetries and Hermiticity of `re`.
    pub fn new(n: usize, r: Vec<Complex64>, re: Vec<Complex64>) -> Result<Self> {
        let data = Self::unchecked(n, r, re)?;
        let residual = data.symmetry_residual();
        let scale = data
            .r
            .iter()
            .chain(&data.re)
            .map(|z| z.norm())
            .fold(1.0, f64::max);
        if residual > SYMMETRY_TOL * scale {
            return Err(Error::AsymmetricCurvature(residual));
        }
        Ok(data)
    }

    /// Projects arbitrary arrays onto the subspace satisfying the symmetries.
    pub fn symmetrized(n: usize, r: Vec<Complex64>, re: Vec<Complex64>) -> Result<Self> {
        let raw = Self::unchecked(n, r, re)?;
        let mut out = Self::zero(n);
        for k in 1..=n {
            for m in 1..=n {
                for l in 1..=n {
                    for q in 1..=n {
                        let avg = |d: &Self, a, b, c, e| {
                            (d.riemann(a, b, c, e)
                                + d.riemann(c, b, a, e)
                                + d.riemann(a, e, c, b)
                                + d.riemann(c, e, a, b))
                                / 4.0
                        };
                        let s = avg(&raw, k, m, l, q);
                        let s_adj = avg(&raw, m, k, q, l).conj();
                        let ix = out.r_index(k, m, l, q);
                        out.r[ix] = (s + s_adj) / 2.0;
                    }
                }
            }
        }
        for l in 1..=n {
            for q in 1..=n {
                let ix = out.re_index(l, q);
                out.re[ix] = (raw.bundle(l, q) + raw.bundle(q, l).conj()) / 2.0;
            }
        }
        Ok(out)
    }

    fn unchecked(n: usize, r: Vec<Complex64>, re: Vec<Complex64>) -> Result<Self> {
        if r.len() != n.pow(4) {
            return Err(Error::DimensionMismatch {
                expected: n.pow(4),
                found: r.len(),
            });
        }
        if re.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: re.len(),
            });
        }
        Ok(Self { n, r, re })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn r_index(&self, k: usize, m: usize, l: usize, q: usize) -> usize {
        let n = self.n;
        (((k - 1) * n + (m - 1)) * n + (l - 1)) * n + (q - 1)
    }

    fn re_index(&self, l: usize, q: usize) -> usize {
        (l - 1) * self.n + (q - 1)
    }

    pub fn riemann(&self, k: usize, m: usize, l: usize, q: usize) -> Complex64 {
        self.r[self.r_index(k, m, l, q)]
    }

    pub fn bundle(&self, l: usize, q: usize) -> Complex64 {
        self.re[self.re_index(l, q)]
    }

    pub fn set_riemann_orbit(&mut self, k: usize, m: usize, l: usize, q: usize, v: Complex64) {
        for (a, b, c, d) in [(k, m, l, q), (l, m, k, q), (k, q, l, m), (l, q, k, m)] {
            let ix = self.r_index(a, b, c, d);
            self.r[ix] = v;
        }
        for (a, b, c, d) in [(m, k, q, l), (q, k, m, l), (m, l, q, k), (q, l, m, k)] {
            let ix = self.r_index(a, b, c, d);
            self.r[ix] = v.conj();
        }
    }

    pub fn set_bundle(&mut self, l: usize, q: usize, v: Complex64) {
        let a = self.re_index(l, q);
        let b = self.re_index(q, l);
        self.re[a] = v;
        self.re[b] = v.conj();
    }

    /// Largest violation of the pair-swap symmetries, the conjugation rule
    /// and Hermiticity of the bundle curvature.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for k in 1..=n {
            for m in 1..=n {
                for l in 1..=n {
                    for q in 1..=n {
                        let v = self.riemann(k, m, l, q);
                        worst = worst
                            .max((v - self.riemann(l, m, k, q)).norm())
                            .max((v - self.riemann(k, q, l, m)).norm())
                            .max((v.conj() - self.riemann(m, k, q, l)).norm());
                    }
                }
            }
        }
        for l in 1..=n {
            for q in 1..=n {
                worst = worst.max((self.bundle(l, q).conj() - self.bundle(q, l)).norm());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(k: usize, m: usize, l: usize, q: usize) -> TensorSymbol {
        TensorSymbol::riemann_raw(2, k, m, l, q).unwrap()
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(r(2, 1, 1, 1).canonicalize().indices(), &[1, 1, 2, 1]);
        assert_eq!(r(1, 1, 1, 1).canonicalize().indices(), &[1, 1, 1, 1]);
        assert_eq!(r(1, 2, 1, 1).canonicalize().indices(), &[1, 1, 1, 2]);
    }

    #[test]
    fn canonical_form_is_orbit_minimum() {
        for k in 1..=2 {
            for m in 1..=2 {
                for l in 1..=2 {
                    for q in 1..=2 {
                        let s = r(k, m, l, q);
                        let min = *s.orbit().iter().min().unwrap();
                        assert_eq!(s.canonicalize(), min);
                        for image in s.orbit() {
                            assert_eq!(image.canonicalize(), min);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn index_out_of_range() {
        assert!(matches!(
            TensorSymbol::riemann(2, 1, 3, 1, 1),
            Err(Error::IndexOutOfRange { index: 3, n: 2 })
        ));
        assert!(TensorSymbol::bundle(1, 0, 1).is_err());
    }

    #[test]
    fn conjugate_examples() {
        let s = TensorScalar::term(rational(1, 12), 1, vec![r(1, 2, 1, 1)]);
        let expected = TensorScalar::term(rational(1, 12), 1, vec![r(2, 1, 1, 1).canonicalize()]);
        assert_eq!(s.conjugate(), expected);

        let c = TensorScalar::ratio(3, 8).times_pi(-1);
        assert_eq!(c.conjugate(), c);

        let e = TensorScalar::symbol(TensorSymbol::bundle(2, 1, 2).unwrap());
        let f = TensorScalar::symbol(TensorSymbol::bundle(2, 2, 1).unwrap());
        assert_eq!(e.conjugate(), f);
    }

    #[test]
    fn substitute_examples() {
        let mut data = CurvatureData::zero(1);
        data.set_riemann_orbit(1, 1, 1, 1, Complex64::new(std::f64::consts::PI, 0.0));
        // r̄/(8π) with r̄ = 8 R(1,1,1,1)
        let scal = TensorScalar::term(
            rational(8, 8),
            -1,
            vec![TensorSymbol::riemann(1, 1, 1, 1, 1).unwrap()],
        );
        let v = scal.substitute(&data, std::f64::consts::PI).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);

        assert_eq!(
            TensorScalar::zero().substitute(&data, 3.0).unwrap(),
            Complex64::new(0.0, 0.0)
        );
        let two_pi = TensorScalar::ratio(2, 1).times_pi(1);
        let v = two_pi.substitute(&data, std::f64::consts::PI).unwrap();
        assert!((v.re - 2.0 * std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn substitute_dimension_mismatch() {
        let s = TensorScalar::symbol(TensorSymbol::riemann(2, 1, 1, 1, 1).unwrap());
        assert!(matches!(
            s.substitute(&CurvatureData::zero(1), 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bundle_products_are_rejected() {
        let e = TensorScalar::symbol(TensorSymbol::bundle(1, 1, 1).unwrap());
        assert!(matches!(e.try_mul(&e), Err(Error::BundleProduct)));
    }

    #[test]
    fn cancellation_removes_terms() {
        let s = TensorScalar::symbol(r(1, 2, 2, 1));
        let t = TensorScalar::symbol(r(2, 1, 1, 2));
        assert!((&s - &t).is_zero());
    }

    #[test]
    fn rendering() {
        let s = TensorScalar::term(rational(-1, 3), -1, vec![r(2, 1, 1, 1)])
            + TensorScalar::ratio(1, 2);
        assert_eq!(s.to_string(), "-1/3*pi^-1*R(1,1,2,1) + 1/2*pi^0");
        assert_eq!(TensorScalar::zero().to_string(), "0");
    }

    #[test]
    fn curvature_validation() {
        let mut data = CurvatureData::zero(2);
        data.set_riemann_orbit(1, 2, 1, 1, Complex64::new(0.3, 0.7));
        data.set_bundle(1, 2, Complex64::new(0.1, -0.2));
        assert!(data.symmetry_residual() < 1e-15);
        let mut r = data.r.clone();
        r[1] += Complex64::new(1.0, 0.0);
        assert!(matches!(
            CurvatureData::new(2, r, data.re.clone()),
            Err(Error::AsymmetricCurvature(_))
        ));
    }
}
