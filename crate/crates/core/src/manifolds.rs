//! Exact finite-`p` Bergman kernels on two model Kähler curves.
//!
//! * `Cp1`: the projective line with the Fubini–Study metric of total area 1,
//!   in the affine coordinate `w`. `L = O(1)` with `|e|^2 = 1/(1+|w|^2)`, so
//!   the Gaussian curvature is `4 pi` and `H^0(L^p)` has the monomial basis
//!   `w^j`, `0 <= j <= p`, with squared norms `j!(p-j)!/(p+1)!`.
//! * `FlatTorus`: `C / (Z + iZ)` with the flat metric of area 1 and the
//!   Landau-gauge frame `|e|^2 = exp(-2 pi y^2)`. `H^0(L^p)` is spanned by the
//!   theta functions
//!   `theta_j(z) = sum_n exp(-pi p (n + j/p)^2 + 2 pi i p (n + j/p) z)`, all of
//!   squared norm `1/sqrt(2p)`.
//!
//! Points are given by their chart coordinate (a complex number). Tangent
//! vectors at the base point are real 2-vectors in an orthonormal frame with
//! `z = Z_1 + i Z_2` aligned with the chart coordinate.
//!
//! An optional holomorphic gauge replaces the standard frame `e` by
//! `exp(a + b w) e`; kernels and transport factors then change, their product
//! in the trivialized kernel does not.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{doubling, gauss_legendre, periodic_trapezoid, Converged};
use crate::tensor::CurvatureData;

const THETA_CUTOFF: f64 = 1e-18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    Cp1,
    FlatTorus,
}

impl ManifoldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ManifoldKind::Cp1 => "cp1",
            ManifoldKind::FlatTorus => "flat-torus",
        }
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ManifoldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cp1" => Ok(ManifoldKind::Cp1),
            "flat-torus" | "torus" => Ok(ManifoldKind::FlatTorus),
            other => Err(Error::Schema(format!("unknown manifold kind '{other}'"))),
        }
    }
}

/// Holomorphic change of frame `e -> exp(a + b w) e` on `L`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Gauge {
    pub a: Complex64,
    pub b: Complex64,
}

impl Gauge {
    pub fn new(a: Complex64, b: Complex64) -> Self {
        Self { a, b }
    }

    /// `log g(w)` for the frame factor `g`.
    pub fn log_factor(&self, w: Complex64) -> Complex64 {
        self.a + self.b * w
    }
}

/// Trivialized and rescaled kernel value with the volume densities used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RescaledSample {
    pub value: Complex64,
    pub kappa_left: f64,
    pub kappa_right: f64,
}

impl RescaledSample {
    /// `p^{-n} P_p(u/sqrt p, u'/sqrt p)` without the density factors.
    pub fn raw(&self) -> Complex64 {
        self.value / (self.kappa_left * self.kappa_right).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelManifold {
    kind: ManifoldKind,
    gauge: Gauge,
}

/// Finite-difference step of [`ModelManifold::numeric_curvature`].
pub const DEFAULT_FD_STEP: f64 = 1e-3;

fn check_power(p: u32) -> Result<()> {
    if p < 1 {
        return Err(Error::InvalidPower(p));
    }
    Ok(())
}

fn tangent(z: &[f64]) -> Result<Complex64> {
    if z.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: z.len(),
        });
    }
    Ok(Complex64::new(z[0], z[1]))
}

/// `ln C(p, j)` from the ratios `(p - k + i)/i`, with compensated summation
/// so the rounding stays at the level of the result rather than of `ln p!`.
fn ln_binomial(p: u32, j: u32) -> f64 {
    let k = j.min(p - j);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for i in 1..=k {
        let term = ((p - k + i) as f64 / i as f64).ln();
        let t = sum + term;
        comp += if sum.abs() >= term.abs() {
            (sum - t) + term
        } else {
            (term - t) + sum
        };
        sum = t;
    }
    sum + comp
}

impl ModelManifold {
    pub fn new(kind: ManifoldKind) -> Self {
        Self {
            kind,
            gauge: Gauge::default(),
        }
    }

    pub fn cp1() -> Self {
        Self::new(ManifoldKind::Cp1)
    }

    pub fn flat_torus() -> Self {
        Self::new(ManifoldKind::FlatTorus)
    }

    pub fn with_gauge(self, gauge: Gauge) -> Self {
        Self { gauge, ..self }
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn dim(&self) -> usize {
        1
    }

    /// Radius of the largest ball on which the normal chart is defined.
    pub fn injectivity_radius(&self) -> f64 {
        match self.kind {
            ManifoldKind::Cp1 => PI.sqrt() / 2.0,
            ManifoldKind::FlatTorus => 0.5,
        }
    }

    pub fn default_base_point(&self) -> Complex64 {
        match self.kind {
            ManifoldKind::Cp1 => Complex64::new(0.3, 0.2),
            ManifoldKind::FlatTorus => Complex64::new(0.25, 0.4),
        }
    }

    /// `log |e|^2` of the (gauged) frame of `L` at `w`.
    pub fn log_frame_norm_sq(&self, w: Complex64) -> f64 {
        self.log_standard_frame_norm_sq(w) + 2.0 * self.gauge.log_factor(w).re
    }

    fn log_standard_frame_norm_sq(&self, w: Complex64) -> f64 {
        match self.kind {
            ManifoldKind::Cp1 => -(1.0 + w.norm_sqr()).ln(),
            ManifoldKind::FlatTorus => -2.0 * PI * w.im * w.im,
        }
    }

    /// Metric coefficient `lambda` with `g = lambda |dw|^2`.
    pub fn metric_coefficient(&self, w: Complex64) -> f64 {
        match self.kind {
            ManifoldKind::Cp1 => 1.0 / (PI * (1.0 + w.norm_sqr()).powi(2)),
            ManifoldKind::FlatTorus => 1.0,
        }
    }

    /// Squared `L^2` norms of the standard basis of `H^0(L^p)`.
    pub fn section_basis_norms(&self, p: u32) -> Result<Vec<f64>> {
        Ok(self
            .log_section_norms(p)?
            .into_iter()
            .map(f64::exp)
            .collect())
    }

    fn log_section_norms(&self, p: u32) -> Result<Vec<f64>> {
        check_power(p)?;
        Ok(match self.kind {
            ManifoldKind::Cp1 => {
                let ln_dim = ((p + 1) as f64).ln();
                (0..=p).map(|j| -ln_binomial(p, j) - ln_dim).collect()
            }
            ManifoldKind::FlatTorus => vec![-0.5 * (2.0 * p as f64).ln(); p as usize],
        })
    }

    /// Coefficients `c_j(x) = s_j(x) / ||s_j||` of the orthonormal basis,
    /// either in the holomorphic frame `e^p` or in the unit frame
    /// `e^p / |e^p|`.
    fn basis_coefficients(&self, p: u32, x: Complex64, unit: bool) -> Result<Vec<Complex64>> {
        let log_norms = self.log_section_norms(p)?;
        let pf = p as f64;
        let gauge = self.gauge.log_factor(x);
        let half_log_std = 0.5 * pf * self.log_standard_frame_norm_sq(x);
        // each branch computes f |e|^p for the standard frame e; with the
        // gauged frame g e the section is s = f g^{-p} (g e)^p
        let frame_shift = if unit {
            Complex64::new(0.0, -pf * gauge.im)
        } else {
            -half_log_std - pf * gauge
        };
        match self.kind {
            ManifoldKind::Cp1 => {
                if !x.is_finite() {
                    return Err(Error::ChartViolation(
                        "point at infinity of the affine chart".into(),
                    ));
                }
                if x == Complex64::new(0.0, 0.0) {
                    let mut c = vec![Complex64::new(0.0, 0.0); log_norms.len()];
                    c[0] = (frame_shift - 0.5 * log_norms[0]).exp();
                    return Ok(c);
                }
                // j log x + (p/2) log |e|^2 = (j ln t + (p - j) ln(1 - t))/2 + i j arg x
                // with t = |x|^2/(1 + |x|^2); the binomial form keeps the
                // exponent small near the dominant j
                let r2 = x.norm_sqr();
                let ln_t = r2.ln() - r2.ln_1p();
                let ln_1mt = -r2.ln_1p();
                let arg = x.arg();
                Ok(log_norms
                    .iter()
                    .enumerate()
                    .map(|(j, ln)| {
                        let jf = j as f64;
                        let re = 0.5 * (jf * ln_t + (pf - jf) * ln_1mt - ln);
                        (Complex64::new(re, jf * arg) + frame_shift).exp()
                    })
                    .collect())
            }
            ManifoldKind::FlatTorus => {
                let (xr, y) = (x.re, x.im);
                let width = ((1.0 / THETA_CUTOFF).ln() / (PI * pf)).sqrt() + 1.0;
                Ok(log_norms
                    .iter()
                    .enumerate()
                    .map(|(j, ln)| {
                        let a = j as f64 / pf;
                        let centre = -(a + y);
                        let lo = (centre - width).floor() as i64;
                        let hi = (centre + width).ceil() as i64;
                        let mut s = Complex64::new(0.0, 0.0);
                        for n in lo..=hi {
                            let t = n as f64 + a;
                            // theta_j e^{-pi p y^2}, term by term
                            let re = -PI * pf * (t + y).powi(2);
                            let im = 2.0 * PI * pf * t * xr;
                            s += Complex64::new(re, im).exp();
                        }
                        s * (frame_shift - 0.5 * ln).exp()
                    })
                    .collect())
            }
        }
    }

    /// `sum_j s_j(x) conj(s_j(y)) / ||s_j||^2` in the holomorphic frame.
    ///
    /// Grows like `|e(x)|^{-p} |e(y)|^{-p}`; use [`Self::unit_frame_kernel`]
    /// for large `p` or points far from the origin.
    pub fn bergman_kernel(&self, p: u32, x: Complex64, y: Complex64) -> Result<Complex64> {
        let cx = self.basis_coefficients(p, x, false)?;
        let cy = self.basis_coefficients(p, y, false)?;
        Ok(cx.iter().zip(&cy).map(|(a, b)| a * b.conj()).sum())
    }

    /// The kernel in the unit frames `e^p/|e^p|` at `x` and `y`.
    pub fn unit_frame_kernel(&self, p: u32, x: Complex64, y: Complex64) -> Result<Complex64> {
        let cx = self.basis_coefficients(p, x, true)?;
        let cy = self.basis_coefficients(p, y, true)?;
        Ok(cx.iter().zip(&cy).map(|(a, b)| a * b.conj()).sum())
    }

    /// `exp_{x0}(Z)` in the chart coordinate.
    pub fn normal_chart(&self, x0: Complex64, z: &[f64]) -> Result<Complex64> {
        let z = tangent(z)?;
        let rho = z.norm();
        if rho.is_nan() || rho >= self.injectivity_radius() {
            return Err(Error::ChartViolation(format!(
                "|Z| = {rho} is not below the injectivity radius {}",
                self.injectivity_radius()
            )));
        }
        match self.kind {
            ManifoldKind::Cp1 => {
                let u = self.cp1_origin_chart(z);
                let den = Complex64::new(1.0, 0.0) - x0.conj() * u;
                if den.norm() < 1e-12 {
                    return Err(Error::ChartViolation(
                        "point at infinity of the affine chart".into(),
                    ));
                }
                Ok((u + x0) / den)
            }
            ManifoldKind::FlatTorus => Ok(x0 + z),
        }
    }

    /// Exponential map at the origin of the affine chart.
    fn cp1_origin_chart(&self, z: Complex64) -> Complex64 {
        let rho = z.norm();
        if rho == 0.0 {
            return z;
        }
        z * ((PI.sqrt() * rho).tan() / rho)
    }

    /// `tau` with `(transported unit vector at exp(Z)) = tau * e^p/|e^p|`,
    /// starting from the unit vector of the frame at `x0`.
    pub fn transport_factor(&self, p: u32, x0: Complex64, z: &[f64]) -> Result<Complex64> {
        check_power(p)?;
        let x = self.normal_chart(x0, z)?;
        let zc = tangent(z)?;
        let pf = p as f64;
        let base_phase = match self.kind {
            ManifoldKind::Cp1 => {
                let u = self.cp1_origin_chart(zc);
                -(Complex64::new(1.0, 0.0) - x0.conj() * u).arg()
            }
            ManifoldKind::FlatTorus => -2.0 * PI * zc.re * (x0.im + 0.5 * zc.im),
        };
        let gauge = self.gauge.log_factor(x0).im - self.gauge.log_factor(x).im;
        Ok(Complex64::from_polar(1.0, pf * (base_phase + gauge)))
    }

    /// Volume density `kappa_{x0}(Z)` of the normal chart.
    pub fn kappa(&self, x0: Complex64, z: &[f64]) -> Result<f64> {
        self.normal_chart(x0, z)?;
        let rho = tangent(z)?.norm();
        Ok(match self.kind {
            ManifoldKind::Cp1 => {
                let t = 2.0 * PI.sqrt() * rho;
                if t == 0.0 {
                    1.0
                } else {
                    t.sin() / t
                }
            }
            ManifoldKind::FlatTorus => 1.0,
        })
    }

    /// `P_{p,x0}(Z, Z')`: the kernel with both fibres identified to the fibre
    /// at `x0` by radial parallel transport.
    pub fn trivialized_kernel(
        &self,
        p: u32,
        x0: Complex64,
        z: &[f64],
        zp: &[f64],
    ) -> Result<Complex64> {
        let x = self.normal_chart(x0, z)?;
        let y = self.normal_chart(x0, zp)?;
        let tx = self.transport_factor(p, x0, z)?;
        let ty = self.transport_factor(p, x0, zp)?;
        Ok(self.unit_frame_kernel(p, x, y)? * tx.conj() * ty)
    }

    /// `p^{-n} kappa^{1/2}(u/sqrt p) kappa^{1/2}(u'/sqrt p) P_{p,x0}(u/sqrt p, u'/sqrt p)`.
    pub fn rescaled_kernel(
        &self,
        p: u32,
        x0: Complex64,
        u: &[f64],
        up: &[f64],
    ) -> Result<RescaledSample> {
        check_power(p)?;
        let s = 1.0 / (p as f64).sqrt();
        let z: Vec<f64> = u.iter().map(|v| v * s).collect();
        let zp: Vec<f64> = up.iter().map(|v| v * s).collect();
        let kappa_left = self.kappa(x0, &z)?;
        let kappa_right = self.kappa(x0, &zp)?;
        let value =
            self.trivialized_kernel(p, x0, &z, &zp)? * (kappa_left * kappa_right).sqrt() / p as f64;
        Ok(RescaledSample {
            value,
            kappa_left,
            kappa_right,
        })
    }

    /// [`Self::numeric_curvature_with_step`] at the default step `1e-3`.
    pub fn numeric_curvature(&self, x0: Complex64) -> CurvatureData {
        self.numeric_curvature_with_step(x0, DEFAULT_FD_STEP)
    }

    /// Curvature tensor at `x0` from the metric by finite differences:
    /// `R = K/4` with `K = -Laplacian(log lambda) / (2 lambda)`, using the
    /// five-point Laplacian at steps `h` and `h/2` and one Richardson step.
    pub fn numeric_curvature_with_step(&self, x0: Complex64, h: f64) -> CurvatureData {
        let log_lambda = |w: Complex64| self.metric_coefficient(w).ln();
        let laplacian = |h: f64| {
            let c = log_lambda(x0);
            let s = log_lambda(x0 + h)
                + log_lambda(x0 - h)
                + log_lambda(x0 + Complex64::new(0.0, h))
                + log_lambda(x0 - Complex64::new(0.0, h));
            (s - 4.0 * c) / (h * h)
        };
        let lap = (4.0 * laplacian(h / 2.0) - laplacian(h)) / 3.0;
        let k = -lap / (2.0 * self.metric_coefficient(x0));
        let mut data = CurvatureData::zero(1);
        data.set_riemann_orbit(1, 1, 1, 1, Complex64::new(k / 4.0, 0.0));
        data
    }

    /// `integral f dv` over the whole manifold with `nodes` Gauss–Legendre
    /// nodes in the non-periodic direction and `2 nodes` trapezoid nodes in
    /// the periodic one.
    pub fn integrate<F>(&self, nodes: usize, mut f: F) -> Result<Complex64>
    where
        F: FnMut(Complex64) -> Result<Complex64>,
    {
        let mut total = Complex64::new(0.0, 0.0);
        self.for_each_node(nodes, |w, weight| {
            total += f(w)? * weight;
            Ok(())
        })?;
        Ok(total)
    }

    fn for_each_node<F>(&self, nodes: usize, mut f: F) -> Result<()>
    where
        F: FnMut(Complex64, f64) -> Result<()>,
    {
        match self.kind {
            ManifoldKind::Cp1 => {
                // w = tan(theta/2) e^{i phi}, dv = sin(theta) dtheta dphi / (4 pi)
                for (theta, wt) in gauss_legendre(nodes, 0.0, PI) {
                    let r = (theta / 2.0).tan();
                    for (phi, wp) in periodic_trapezoid(2 * nodes, 0.0, 2.0 * PI) {
                        f(
                            Complex64::from_polar(r, phi),
                            wt * wp * theta.sin() / (4.0 * PI),
                        )?;
                    }
                }
            }
            ManifoldKind::FlatTorus => {
                for (y, wy) in gauss_legendre(nodes, 0.0, 1.0) {
                    for (x, wx) in periodic_trapezoid(2 * nodes, 0.0, 1.0) {
                        f(Complex64::new(x, y), wx * wy)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// [`Self::integrate`] from 200 nodes with doubling until two successive
    /// values agree to `tol`.
    pub fn integrate_converged<F>(&self, tol: f64, mut f: F) -> Result<Converged>
    where
        F: FnMut(Complex64) -> Result<Complex64>,
    {
        let mut err = None;
        let out = doubling(
            |nodes| match self.integrate(nodes, &mut f) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    Complex64::new(f64::NAN, 0.0)
                }
            },
            200,
            1600,
            tol,
        );
        match err {
            Some(e) => Err(e),
            None => out,
        }
    }

    /// Squared norms of the basis by quadrature of `|s_j|^2 |e^p|^2`, with
    /// node doubling from 100 until every norm changes by less than `tol`
    /// relative.
    pub fn quadrature_section_norms(&self, p: u32, tol: f64) -> Result<Vec<f64>> {
        let exact = self.section_basis_norms(p)?;
        // coefficients are normalized by the closed-form norm, so each
        // integral is the ratio to it
        let ratios = |nodes: usize| -> Result<Vec<f64>> {
            let mut acc = vec![0.0; exact.len()];
            self.for_each_node(nodes, |w, weight| {
                for (a, c) in acc.iter_mut().zip(self.basis_coefficients(p, w, true)?) {
                    *a += c.norm_sqr() * weight;
                }
                Ok(())
            })?;
            Ok(acc)
        };
        let mut nodes = 100;
        let mut prev = ratios(nodes)?;
        while nodes < 1600 {
            nodes *= 2;
            let next = ratios(nodes)?;
            let change = next
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if change <= tol {
                return Ok(next.iter().zip(&exact).map(|(r, e)| r * e).collect());
            }
            prev = next;
        }
        Err(Error::InsufficientData(format!(
            "section norms did not converge to {tol:e} within 1600 nodes"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse() {
        assert_eq!("cp1".parse::<ManifoldKind>().unwrap(), ManifoldKind::Cp1);
        assert_eq!(
            "flat-torus".parse::<ManifoldKind>().unwrap(),
            ManifoldKind::FlatTorus
        );
        assert!("sphere".parse::<ManifoldKind>().is_err());
    }

    #[test]
    fn cp1_norms_p1_equal() {
        let n = ModelManifold::cp1().section_basis_norms(1).unwrap();
        assert_eq!(n.len(), 2);
        assert!((n[0] - 0.5).abs() < 1e-15 && (n[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn torus_norms_equal() {
        let n = ModelManifold::flat_torus().section_basis_norms(7).unwrap();
        assert_eq!(n.len(), 7);
        assert!(n.iter().all(|v| (v - 1.0 / 14f64.sqrt()).abs() < 1e-15));
    }

    #[test]
    fn invalid_power() {
        let m = ModelManifold::cp1();
        assert!(matches!(
            m.section_basis_norms(0),
            Err(Error::InvalidPower(0))
        ));
        assert!(m
            .rescaled_kernel(0, Complex64::new(0.0, 0.0), &[0.0, 0.0], &[0.0, 0.0])
            .is_err());
    }

    #[test]
    fn chart_limits() {
        let m = ModelManifold::flat_torus();
        assert!(m
            .normal_chart(Complex64::new(0.0, 0.0), &[0.5, 0.0])
            .is_err());
        assert!(m
            .normal_chart(Complex64::new(0.0, 0.0), &[0.3, 0.0])
            .is_ok());
        assert!(m.normal_chart(Complex64::new(0.0, 0.0), &[0.3]).is_err());
        let c = ModelManifold::cp1();
        assert!(matches!(
            c.kappa(Complex64::new(0.0, 0.0), &[0.9, 0.0]),
            Err(Error::ChartViolation(_))
        ));
    }

    #[test]
    fn cp1_closed_form_kernel() {
        let m = ModelManifold::cp1();
        let (x, y) = (Complex64::new(0.2, -0.4), Complex64::new(-0.1, 0.3));
        let p = 9;
        let want = (p as f64 + 1.0) * (Complex64::new(1.0, 0.0) + x * y.conj()).powu(p);
        let got = m.bergman_kernel(p, x, y).unwrap();
        assert!((got - want).norm() < 1e-12 * want.norm());
        let unit = m.unit_frame_kernel(p, x, x).unwrap();
        assert!((unit.re - 10.0).abs() < 1e-12 && unit.im.abs() < 1e-12);
    }

    #[test]
    fn zero_tangent_vector() {
        for m in [ModelManifold::cp1(), ModelManifold::flat_torus()] {
            let x0 = m.default_base_point();
            assert_eq!(m.normal_chart(x0, &[0.0, 0.0]).unwrap(), x0);
            assert_eq!(
                m.transport_factor(5, x0, &[0.0, 0.0]).unwrap(),
                Complex64::new(1.0, 0.0)
            );
            assert_eq!(m.kappa(x0, &[0.0, 0.0]).unwrap(), 1.0);
        }
    }

    #[test]
    fn cp1_diagonal_rescaled() {
        let m = ModelManifold::cp1();
        let s = m
            .rescaled_kernel(49, m.default_base_point(), &[0.0, 0.0], &[0.0, 0.0])
            .unwrap();
        assert!((s.value - Complex64::new(50.0 / 49.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn curvature_values() {
        let c = ModelManifold::cp1().numeric_curvature(Complex64::new(0.3, 0.2));
        assert!((c.riemann(1, 1, 1, 1).re - PI).abs() < 1e-6);
        assert!(c.symmetry_residual() < 1e-8);
        let t = ModelManifold::flat_torus().numeric_curvature(Complex64::new(0.1, 0.7));
        assert_eq!(t.riemann(1, 1, 1, 1).norm(), 0.0);
    }

    #[test]
    fn total_volume_is_one() {
        for m in [ModelManifold::cp1(), ModelManifold::flat_torus()] {
            let v = m
                .integrate_converged(1e-11, |_| Ok(Complex64::new(1.0, 0.0)))
                .unwrap();
            assert!((v.value.re - 1.0).abs() < 1e-11, "{:?}", m.kind());
        }
        let bad = ModelManifold::cp1().integrate_converged(1e-3, |_| Err(Error::InvalidPower(0)));
        assert!(matches!(bad, Err(Error::InvalidPower(0))));
    }
}
