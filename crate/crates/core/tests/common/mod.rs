#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use bergman_core::calculus::{KernelMonomial, Letter, Monomial, OffDiagPolynomial, OperatorWord};
use bergman_core::tensor::{rational, CurvatureData, TensorScalar, TensorSymbol};
use num_complex::Complex64;
use proptest::prelude::*;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Truncated Taylor jet in `nv` real variables around a point.
#[derive(Clone, Debug)]
pub struct Jet {
    nv: usize,
    deg: usize,
    terms: BTreeMap<Vec<u8>, Complex64>,
}

impl Jet {
    pub fn constant(nv: usize, deg: usize, v: Complex64) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![0; nv], v);
        Self { nv, deg, terms }
    }

    /// The coordinate `x_k` as a jet around `x_k = at`.
    pub fn variable(nv: usize, deg: usize, k: usize, at: f64) -> Self {
        let mut j = Self::constant(nv, deg, c(at, 0.0));
        if deg >= 1 {
            let mut e = vec![0; nv];
            e[k] = 1;
            j.terms.insert(e, c(1.0, 0.0));
        }
        j
    }

    pub fn value(&self) -> Complex64 {
        self.terms
            .get(&vec![0; self.nv])
            .copied()
            .unwrap_or_default()
    }

    pub fn add(&self, o: &Jet) -> Jet {
        let mut out = self.clone();
        out.deg = self.deg.min(o.deg);
        for (e, v) in &o.terms {
            *out.terms.entry(e.clone()).or_default() += v;
        }
        out.truncate();
        out
    }

    pub fn scale(&self, s: Complex64) -> Jet {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= s;
        }
        out
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let deg = self.deg.min(o.deg);
        let mut terms: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
        for (a, x) in &self.terms {
            for (b, y) in &o.terms {
                let e: Vec<u8> = a.iter().zip(b).map(|(p, q)| p + q).collect();
                if e.iter().map(|&d| d as usize).sum::<usize>() <= deg {
                    *terms.entry(e).or_default() += x * y;
                }
            }
        }
        Jet {
            nv: self.nv,
            deg,
            terms,
        }
    }

    pub fn exp(&self) -> Jet {
        let c0 = self.value();
        let mut h = self.clone();
        h.terms.remove(&vec![0; self.nv]);
        let mut out = Jet::constant(self.nv, self.deg, c(1.0, 0.0));
        let mut power = Jet::constant(self.nv, self.deg, c(1.0, 0.0));
        for k in 1..=self.deg {
            power = power.mul(&h).scale(c(1.0 / k as f64, 0.0));
            out = out.add(&power);
        }
        out.scale(c0.exp())
    }

    pub fn derivative(&self, k: usize) -> Jet {
        let mut terms = BTreeMap::new();
        for (e, v) in &self.terms {
            if e[k] > 0 {
                let mut f = e.clone();
                f[k] -= 1;
                terms.insert(f, v * e[k] as f64);
            }
        }
        Jet {
            nv: self.nv,
            deg: self.deg.saturating_sub(1),
            terms,
        }
    }

    fn truncate(&mut self) {
        let deg = self.deg;
        self.terms
            .retain(|e, _| e.iter().map(|&d| d as usize).sum::<usize>() <= deg);
    }
}

/// Complex coordinate `z_i = x_{2i-1} + i x_{2i}` as a jet at `z0`.
fn z_jet(z0: &[f64], deg: usize, i: usize, conj: bool) -> Jet {
    let nv = z0.len();
    let x = Jet::variable(nv, deg, 2 * i - 2, z0[2 * i - 2]);
    let y = Jet::variable(nv, deg, 2 * i - 1, z0[2 * i - 1]);
    x.add(&y.scale(c(0.0, if conj { -1.0 } else { 1.0 })))
}

/// `b_i f = -(d/dx_i - i d/dy_i) f + pi conj(z_i) f`.
pub fn jet_b(f: &Jet, z0: &[f64], i: usize) -> Jet {
    let d = f
        .derivative(2 * i - 2)
        .add(&f.derivative(2 * i - 1).scale(c(0.0, -1.0)));
    d.scale(c(-1.0, 0.0))
        .add(&f.mul(&z_jet(z0, f.deg, i, true)).scale(c(PI, 0.0)))
}

/// `b+_i f = (d/dx_i + i d/dy_i) f + pi z_i f`.
pub fn jet_b_plus(f: &Jet, z0: &[f64], i: usize) -> Jet {
    let d = f
        .derivative(2 * i - 2)
        .add(&f.derivative(2 * i - 1).scale(c(0.0, 1.0)));
    d.add(&f.mul(&z_jet(z0, f.deg, i, false)).scale(c(PI, 0.0)))
}

/// Jet of `z^beta z'^gamma conj(z')^delta P(Z, Z')` in the variables `Z`.
pub fn coordinate_gaussian_jet(key: &KernelMonomial, z0: &[f64], zp: &[f64], deg: usize) -> Jet {
    let n = z0.len() / 2;
    let nv = 2 * n;
    let zpc: Vec<Complex64> = (0..n).map(|i| c(zp[2 * i], zp[2 * i + 1])).collect();
    let mut exponent = Jet::constant(nv, deg, c(0.0, 0.0));
    let mut f = Jet::constant(nv, deg, c(1.0, 0.0));
    for i in 1..=n {
        let z = z_jet(z0, deg, i, false);
        let zb = z_jet(z0, deg, i, true);
        let w = zpc[i - 1];
        let q = z
            .mul(&zb)
            .add(&Jet::constant(nv, deg, c(w.norm_sqr(), 0.0)))
            .add(&z.scale(-2.0 * w.conj()));
        exponent = exponent.add(&q.scale(c(-PI / 2.0, 0.0)));
        for _ in 0..key.coords.exponent(bergman_core::calculus::Var::Z, i) {
            f = f.mul(&z);
        }
        let zp_pow = w.powu(key.coords.exponent(bergman_core::calculus::Var::ZPrime, i) as u32)
            * w.conj().powu(
                key.coords
                    .exponent(bergman_core::calculus::Var::ZPrimeBar, i) as u32,
            );
        f = f.scale(zp_pow);
    }
    f.mul(&exponent.exp())
}

/// `b^alpha (z^beta z'^gamma zb'^delta P)` at `(Z0, Z')`, by differentiating jets.
pub fn jet_kernel_value(key: &KernelMonomial, z0: &[f64], zp: &[f64]) -> Complex64 {
    let deg = key.b_degree();
    let mut f = coordinate_gaussian_jet(key, z0, zp, deg);
    for (i, &a) in key.b.iter().enumerate() {
        for _ in 0..a {
            f = jet_b(&f, z0, i + 1);
        }
    }
    f.value()
}

/// `L (b^alpha z^beta ... P)` at `(Z0, Z')` with `L = sum_i b_i b+_i`.
pub fn jet_l_value(key: &KernelMonomial, z0: &[f64], zp: &[f64]) -> Complex64 {
    let deg = key.b_degree() + 2;
    let mut f = coordinate_gaussian_jet(key, z0, zp, deg);
    for (i, &a) in key.b.iter().enumerate() {
        for _ in 0..a {
            f = jet_b(&f, z0, i + 1);
        }
    }
    let n = key.b.len();
    let mut total = c(0.0, 0.0);
    for i in 1..=n {
        total += jet_b(&jet_b_plus(&f, z0, i), z0, i).value();
    }
    total
}

// ---- strategies ----

pub fn kernel_monomial(n: usize, max_b: usize) -> impl Strategy<Value = KernelMonomial> {
    (
        proptest::collection::vec(0u8..=max_b as u8, n),
        proptest::collection::vec(0u8..=2, n),
        proptest::collection::vec(0u8..=1, n),
        proptest::collection::vec(0u8..=1, n),
    )
        .prop_filter("|alpha| bounded", move |(b, ..)| {
            b.iter().map(|&e| e as usize).sum::<usize>() <= max_b
        })
        .prop_map(move |(b, z, zp, zpb)| KernelMonomial {
            b,
            coords: Monomial::from_parts(&z, &vec![0; z.len()], &zp, &zpb).unwrap(),
        })
}

pub fn letter(n: usize) -> impl Strategy<Value = Letter> {
    (0usize..5, 1..=n).prop_map(|(k, i)| match k {
        0 => Letter::B(i),
        1 => Letter::BPlus(i),
        2 => Letter::Z(i),
        3 => Letter::ZPrime(i),
        _ => Letter::ZPrimeBar(i),
    })
}

pub fn words(n: usize) -> impl Strategy<Value = Vec<OperatorWord>> {
    proptest::collection::vec(
        (
            proptest::collection::vec(letter(n), 0..7),
            -5i64..=5,
            1i64..=4,
        ),
        1..4,
    )
    .prop_map(|ws| {
        ws.into_iter()
            .map(|(letters, a, b)| OperatorWord::new(letters, TensorScalar::ratio(a, b)))
            .collect()
    })
}

pub fn symbol(n: usize) -> impl Strategy<Value = TensorSymbol> {
    (1..=n, 1..=n, 1..=n, 1..=n)
        .prop_map(move |(k, m, l, q)| TensorSymbol::riemann(n, k, m, l, q).unwrap())
}

pub fn bundle_symbol(n: usize) -> impl Strategy<Value = TensorSymbol> {
    (1..=n, 1..=n).prop_map(move |(l, q)| TensorSymbol::bundle(n, l, q).unwrap())
}

pub fn scalar(n: usize) -> impl Strategy<Value = TensorScalar> {
    proptest::collection::vec(
        (
            -9i64..=9,
            1i64..=6,
            -2i32..=2,
            proptest::collection::vec(symbol(n), 0..3),
            proptest::option::of(bundle_symbol(n)),
        ),
        0..4,
    )
    .prop_map(|terms| {
        let mut s = TensorScalar::zero();
        for (a, b, k, mut syms, e) in terms {
            syms.extend(e);
            s += &TensorScalar::term(rational(a, b), k, syms);
        }
        s
    })
}

pub fn monomial(n: usize) -> impl Strategy<Value = Monomial> {
    proptest::collection::vec(0u8..=2, 4 * n).prop_map(move |e| {
        Monomial::from_parts(&e[..n], &e[n..2 * n], &e[2 * n..3 * n], &e[3 * n..]).unwrap()
    })
}

pub fn polynomial(n: usize) -> impl Strategy<Value = OffDiagPolynomial> {
    proptest::collection::vec((monomial(n), scalar(n)), 0..6).prop_map(move |terms| {
        let mut p = OffDiagPolynomial::zero(n);
        for (m, s) in terms {
            p.add_term(m, &s);
        }
        p
    })
}

pub fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-0.8f64..0.8, 2 * n)
}

/// Random data with the Kähler symmetries.
pub fn curvature(n: usize) -> impl Strategy<Value = CurvatureData> {
    (
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n.pow(4)),
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n),
    )
        .prop_map(move |(r, e)| {
            let r = r.into_iter().map(|(a, b)| c(a, b)).collect();
            let e = e.into_iter().map(|(a, b)| c(a, b)).collect();
            CurvatureData::symmetrized(n, r, e).unwrap()
        })
}

// ---- ODE oracles ----

/// Classical RK4 for `y' = f(t, y)` on `[0, 1]` with `steps` steps.
pub fn rk4<F>(mut y: Vec<f64>, steps: usize, f: F) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let h = 1.0 / steps as f64;
    let axpy =
        |y: &[f64], k: &[f64], s: f64| y.iter().zip(k).map(|(a, b)| a + s * b).collect::<Vec<_>>();
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = f(t, &y);
        let k2 = f(t + h / 2.0, &axpy(&y, &k1, h / 2.0));
        let k3 = f(t + h / 2.0, &axpy(&y, &k2, h / 2.0));
        let k4 = f(t + h, &axpy(&y, &k3, h));
        for j in 0..y.len() {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    y
}

#[derive(Clone, Copy, Debug)]
pub enum Model {
    Sphere,
    Flat,
}

/// `(a, b)` of the frame change `exp(a + b w)`.
pub type FrameChange = (Complex64, Complex64);

fn log_h(model: Model, g: FrameChange, w: Complex64) -> f64 {
    let base = match model {
        Model::Sphere => -(1.0 + w.norm_sqr()).ln(),
        Model::Flat => -2.0 * PI * w.im * w.im,
    };
    base + 2.0 * (g.0 + g.1 * w).re
}

/// `d log h / dw` for the gauged frame.
fn connection(model: Model, g: FrameChange, w: Complex64) -> Complex64 {
    let base = match model {
        Model::Sphere => -w.conj() / (1.0 + w.norm_sqr()),
        Model::Flat => c(0.0, 2.0 * PI * w.im),
    };
    base + g.1
}

/// Integrates the geodesic with initial velocity `Z` (orthonormal frame)
/// together with the transport ODE `f' = -p theta(gamma') f` for the
/// holomorphic frame. Returns the endpoint and the unit-modulus factor of the
/// transported unit vector against `e^p/|e^p|`.
pub fn transport_oracle(
    model: Model,
    g: FrameChange,
    p: u32,
    x0: Complex64,
    z: Complex64,
    steps: usize,
) -> (Complex64, Complex64) {
    let pf = p as f64;
    let v0 = match model {
        Model::Sphere => z * (PI.sqrt() * (1.0 + x0.norm_sqr())),
        Model::Flat => z,
    };
    let lf0 = -0.5 * pf * log_h(model, g, x0);
    let y = rk4(vec![x0.re, x0.im, v0.re, v0.im, lf0, 0.0], steps, |_, y| {
        let w = c(y[0], y[1]);
        let v = c(y[2], y[3]);
        let acc = match model {
            Model::Sphere => 2.0 * w.conj() * v * v / (1.0 + w.norm_sqr()),
            Model::Flat => c(0.0, 0.0),
        };
        let dlf = -pf * connection(model, g, w) * v;
        vec![v.re, v.im, acc.re, acc.im, dlf.re, dlf.im]
    });
    let x = c(y[0], y[1]);
    let lf = c(y[4], y[5]);
    (x, (lf + 0.5 * pf * log_h(model, g, x)).exp())
}

/// Area density `lambda` of the metric in the chart coordinate.
pub fn metric_density(model: Model, w: Complex64) -> f64 {
    match model {
        Model::Sphere => 1.0 / (PI * (1.0 + w.norm_sqr()).powi(2)),
        Model::Flat => 1.0,
    }
}
