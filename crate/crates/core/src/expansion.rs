//! Assembly of the second coefficient `J_2` of the near-diagonal expansion.
//!
//! The input is the image of the second-order operator under
//! `L^{-1} P^perp`, given in closed form as
//! `{ O2 + b_q/(4 pi) RE(l,q) z_l } P` with
//!
//! ```text
//! O2 = b_m b_q/(48 pi) R(k,m,l,q) z_k z_l
//!    + b_q/(3 pi) R(l,k,k,q) z_l
//!    - b_q/12 R(k,m,l,q) z_k z_l zb'_m
//! ```
//!
//! (repeated indices summed over `1..n`). `J_2` is then `-Q - Q*` where `Q P`
//! is that image and `Q*` its kernel adjoint.

use serde::Serialize;

use crate::calculus::{
    normal_order_words, resolve_against_p, Letter, Monomial, NormalOrderedKernel,
    OffDiagPolynomial, OperatorWord, Var,
};
use crate::error::Result;
use crate::tensor::{rational, TensorScalar, TensorSymbol};

fn riemann(n: usize, k: usize, m: usize, l: usize, q: usize) -> TensorScalar {
    TensorScalar::symbol(TensorSymbol::riemann(n, k, m, l, q).expect("index in range"))
}

fn bundle(n: usize, l: usize, q: usize) -> TensorScalar {
    TensorScalar::symbol(TensorSymbol::bundle(n, l, q).expect("index in range"))
}

fn var(n: usize, v: Var, i: usize) -> OffDiagPolynomial {
    OffDiagPolynomial::var(n, v, i).expect("index in range")
}

fn constant(n: usize, c: TensorScalar) -> OffDiagPolynomial {
    OffDiagPolynomial::constant(n, c)
}

fn cube(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (1..=n).map(move |i| {
                    let mut v = prefix.clone();
                    v.push(i);
                    v
                })
            })
            .collect();
    }
    out
}

/// Scalar curvature `8 R(m,q,q,m)`, summed.
pub fn scalar_curvature(n: usize) -> TensorScalar {
    let mut s = TensorScalar::zero();
    for ix in cube(n, 2) {
        s += &riemann(n, ix[0], ix[1], ix[1], ix[0]).scale_int(8);
    }
    s
}

/// `RE(q,q)`, summed.
pub fn bundle_trace(n: usize) -> TensorScalar {
    let mut s = TensorScalar::zero();
    for q in 1..=n {
        s += &bundle(n, q, q);
    }
    s
}

/// Ricci-type contraction `R(l,k,k,q)` for fixed `l, q`.
fn ricci(n: usize, l: usize, q: usize) -> TensorScalar {
    let mut s = TensorScalar::zero();
    for k in 1..=n {
        s += &riemann(n, l, k, k, q);
    }
    s
}

/// Diagonal value `rbar/(8 pi) + RE(q,q)/pi` of `J_2`.
pub fn diagonal_coefficient(n: usize) -> TensorScalar {
    scalar_curvature(n).scale(&rational(1, 8)).times_pi(-1) + bundle_trace(n).times_pi(-1)
}

/// The operator `O2 + b_q/(4 pi) RE(l,q) z_l` as a list of words.
#[derive(Clone, Debug)]
pub struct O2TildeOperator {
    n: usize,
    riemann_words: Vec<OperatorWord>,
    bundle_words: Vec<OperatorWord>,
}

impl O2TildeOperator {
    pub fn new(n: usize) -> Self {
        let mut riemann_words = Vec::new();
        for ix in cube(n, 4) {
            let (k, m, l, q) = (ix[0], ix[1], ix[2], ix[3]);
            let r = riemann(n, k, m, l, q);
            riemann_words.push(OperatorWord::new(
                vec![Letter::B(m), Letter::B(q), Letter::Z(k), Letter::Z(l)],
                r.scale(&rational(1, 48)).times_pi(-1),
            ));
            riemann_words.push(OperatorWord::new(
                vec![
                    Letter::B(q),
                    Letter::Z(k),
                    Letter::Z(l),
                    Letter::ZPrimeBar(m),
                ],
                r.scale(&rational(-1, 12)),
            ));
        }
        for ix in cube(n, 3) {
            let (l, k, q) = (ix[0], ix[1], ix[2]);
            riemann_words.push(OperatorWord::new(
                vec![Letter::B(q), Letter::Z(l)],
                riemann(n, l, k, k, q).scale(&rational(1, 3)).times_pi(-1),
            ));
        }
        let mut bundle_words = Vec::new();
        for ix in cube(n, 2) {
            let (l, q) = (ix[0], ix[1]);
            bundle_words.push(OperatorWord::new(
                vec![Letter::B(q), Letter::Z(l)],
                bundle(n, l, q).scale(&rational(1, 4)).times_pi(-1),
            ));
        }
        Self {
            n,
            riemann_words,
            bundle_words,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn riemann_words(&self) -> &[OperatorWord] {
        &self.riemann_words
    }

    pub fn bundle_words(&self) -> &[OperatorWord] {
        &self.bundle_words
    }

    fn kernel_of(&self, words: &[OperatorWord]) -> Result<NormalOrderedKernel> {
        normal_order_words(self.n, words, |_| 0)
    }

    /// `O2 P` in normal form (curvature of `X` only).
    pub fn riemann_kernel(&self) -> Result<NormalOrderedKernel> {
        self.kernel_of(&self.riemann_words)
    }

    /// `b_q/(4 pi) RE(l,q) z_l P` in normal form.
    pub fn bundle_kernel(&self) -> Result<NormalOrderedKernel> {
        self.kernel_of(&self.bundle_words)
    }
}

/// Normal-ordered kernel `{O2 + b_q/(4 pi) RE(l,q) z_l} P`.
pub fn build_l_inverse_image(n: usize) -> Result<NormalOrderedKernel> {
    let op = O2TildeOperator::new(n);
    Ok(op.riemann_kernel()?.add(&op.bundle_kernel()?))
}

/// `J_2 = -Q - Q*` where `Q P` is the resolved inverse image.
pub fn compute_j2(n: usize) -> Result<OffDiagPolynomial> {
    let q = resolve_against_p(&build_l_inverse_image(n)?)?;
    Ok(-(&q + &q.adjoint()))
}

/// Literal transcriptions of the closed-form intermediate and final results.
pub mod reference {
    use super::*;

    /// The closed form of `J_2`.
    pub fn j2(n: usize) -> OffDiagPolynomial {
        use Var::*;
        let mut out = OffDiagPolynomial::zero(n);
        for ix in cube(n, 4) {
            let (k, m, l, q) = (ix[0], ix[1], ix[2], ix[3]);
            let monos = [
                (1, [(Z, k), (Z, l), (ZBar, m), (ZBar, q)]),
                (6, [(Z, k), (Z, l), (ZPrimeBar, m), (ZPrimeBar, q)]),
                (-4, [(Z, k), (Z, l), (ZBar, m), (ZPrimeBar, q)]),
                (-4, [(Z, k), (ZPrime, l), (ZPrimeBar, m), (ZPrimeBar, q)]),
                (
                    1,
                    [(ZPrime, k), (ZPrime, l), (ZPrimeBar, m), (ZPrimeBar, q)],
                ),
            ];
            let coeff = riemann(n, k, m, l, q).scale(&rational(-1, 12)).times_pi(1);
            for (w, factors) in monos {
                let mut p = constant(n, coeff.scale_int(w));
                for (v, i) in factors {
                    p = &p * &var(n, v, i);
                }
                out = &out + &p;
            }
        }
        for ix in cube(n, 3) {
            let (k, m, q) = (ix[0], ix[1], ix[2]);
            let c = riemann(n, k, m, q, q).scale(&rational(-1, 3));
            let quad =
                &(&var(n, Z, k) * &var(n, ZBar, m)) + &(&var(n, ZPrime, k) * &var(n, ZPrimeBar, m));
            out = &out + &quad.scale(&c).expect("no bundle products");
        }
        out = &out + &constant(n, scalar_curvature(n).scale(&rational(1, 8)).times_pi(-1));
        out = &out + &constant(n, bundle_trace(n).times_pi(-1));
        for ix in cube(n, 2) {
            let (l, q) = (ix[0], ix[1]);
            let quad = &(&(&var(n, Z, l) * &var(n, ZBar, q))
                - &(&var(n, Z, l) * &var(n, ZPrimeBar, q)).scale_rational(2, 1, 0))
                + &(&var(n, ZPrime, l) * &var(n, ZPrimeBar, q));
            out = &out
                + &quad
                    .scale(&bundle(n, l, q).scale(&rational(-1, 2)))
                    .expect("single bundle factor");
        }
        out
    }

    fn quartic_block(n: usize) -> OffDiagPolynomial {
        use Var::*;
        let mut out = OffDiagPolynomial::zero(n);
        for ix in cube(n, 4) {
            let (k, m, l, q) = (ix[0], ix[1], ix[2], ix[3]);
            let left = &var(n, ZBar, m) - &var(n, ZPrimeBar, m).scale_rational(3, 1, 0);
            let right = &var(n, ZBar, q) - &var(n, ZPrimeBar, q);
            let p = &(&(&var(n, Z, k) * &var(n, Z, l)) * &left) * &right;
            out = &out
                + &p.scale(&riemann(n, k, m, l, q).scale(&rational(1, 12)).times_pi(1))
                    .expect("scalar");
        }
        out
    }

    fn constant_block(n: usize) -> OffDiagPolynomial {
        let mut c = TensorScalar::zero();
        for ix in cube(n, 2) {
            c += &riemann(n, ix[0], ix[0], ix[1], ix[1]);
        }
        constant(n, c.scale(&rational(-1, 2)).times_pi(-1))
    }

    /// Bracket of the resolved `O2 P`, before combining the quadratic terms.
    pub fn o2_image_expanded(n: usize) -> OffDiagPolynomial {
        use Var::*;
        let mut out = &quartic_block(n) + &constant_block(n);
        for ix in cube(n, 3) {
            let (k, l, q) = (ix[0], ix[1], ix[2]);
            let p = &var(n, Z, l) * &(&var(n, ZBar, q) - &var(n, ZPrimeBar, q));
            out = &out
                + &p.scale(&riemann(n, k, k, l, q).scale(&rational(1, 3)))
                    .expect("scalar");
            let p = &var(n, Z, k) * &var(n, ZPrimeBar, l);
            out = &out
                + &p.scale(&riemann(n, k, l, q, q).scale(&rational(1, 3)))
                    .expect("scalar");
        }
        out
    }

    /// Bracket of the resolved `O2 P` with the quadratic terms combined.
    pub fn o2_image(n: usize) -> OffDiagPolynomial {
        use Var::*;
        let mut out = &quartic_block(n) + &constant_block(n);
        for ix in cube(n, 3) {
            let (k, m, q) = (ix[0], ix[1], ix[2]);
            let p = &var(n, Z, k) * &var(n, ZBar, m);
            out = &out
                + &p.scale(&riemann(n, k, m, q, q).scale(&rational(1, 3)))
                    .expect("scalar");
        }
        out
    }

    /// Kernel adjoint of [`o2_image`], transcribed independently.
    pub fn o2_image_adjoint(n: usize) -> OffDiagPolynomial {
        use Var::*;
        let mut out = constant_block(n);
        for ix in cube(n, 4) {
            let (k, m, l, q) = (ix[0], ix[1], ix[2], ix[3]);
            let p = &(&(&var(n, ZPrimeBar, m) * &var(n, ZPrimeBar, q))
                * &(&var(n, ZPrime, k) - &var(n, Z, k).scale_rational(3, 1, 0)))
                * &(&var(n, ZPrime, l) - &var(n, Z, l));
            out = &out
                + &p.scale(&riemann(n, k, m, l, q).scale(&rational(1, 12)).times_pi(1))
                    .expect("scalar");
        }
        for ix in cube(n, 3) {
            let (k, m, q) = (ix[0], ix[1], ix[2]);
            let p = &var(n, ZPrimeBar, m) * &var(n, ZPrime, k);
            out = &out
                + &p.scale(&riemann(n, k, m, q, q).scale(&rational(1, 3)))
                    .expect("scalar");
        }
        out
    }

    /// `-(b_q/(4 pi) RE(l,q) z_l P) / P`.
    pub fn bundle_image(n: usize) -> OffDiagPolynomial {
        use Var::*;
        let mut out = constant(n, bundle_trace(n).scale(&rational(1, 2)).times_pi(-1));
        for ix in cube(n, 2) {
            let (l, q) = (ix[0], ix[1]);
            let p = &var(n, Z, l) * &(&var(n, ZBar, q) - &var(n, ZPrimeBar, q));
            out = &out
                + &p.scale(&bundle(n, l, q).scale(&rational(-1, 2)))
                    .expect("single bundle factor");
        }
        out
    }

    /// Kernel adjoint of [`bundle_image`], transcribed independently.
    pub fn bundle_image_adjoint(n: usize) -> OffDiagPolynomial {
        use Var::*;
        let mut out = constant(n, bundle_trace(n).scale(&rational(1, 2)).times_pi(-1));
        for ix in cube(n, 2) {
            let (l, q) = (ix[0], ix[1]);
            let p = &var(n, ZPrimeBar, l) * &(&var(n, ZPrime, q) - &var(n, Z, q));
            out = &out
                + &p.scale(&bundle(n, q, l).scale(&rational(-1, 2)))
                    .expect("single bundle factor");
        }
        out
    }
}

pub use reference::j2 as reference_j2;

/// `1 + (1/3) R(l,k,k,q) z_l zb_q`: the inverse square root of the volume
/// density in normal coordinates through quadratic order.
pub fn kappa_half_inverse_quadratic(n: usize) -> OffDiagPolynomial {
    kappa_quadratic_in(n, Var::Z, Var::ZBar) + constant(n, TensorScalar::one())
}

fn kappa_quadratic_in(n: usize, holo: Var, anti: Var) -> OffDiagPolynomial {
    let mut out = OffDiagPolynomial::zero(n);
    for ix in cube(n, 2) {
        let (l, q) = (ix[0], ix[1]);
        let p = &var(n, holo, l) * &var(n, anti, q);
        out = &out
            + &p.scale(&ricci(n, l, q).scale(&rational(1, 3)))
                .expect("scalar");
    }
    out
}

/// Coefficient of `1/p` in `p^{-n} P_p(u/sqrt(p), u'/sqrt(p)) / P(u, u')`:
/// `J_2` plus the quadratic parts of both volume-density factors.
pub fn combined_p_inverse_coefficient(n: usize) -> Result<OffDiagPolynomial> {
    Ok(
        &(&compute_j2(n)? + &kappa_quadratic_in(n, Var::Z, Var::ZBar))
            + &kappa_quadratic_in(n, Var::ZPrime, Var::ZPrimeBar),
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StructureViolation {
    pub monomial: String,
    pub degree: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StructureReport {
    pub order: usize,
    pub max_degree: usize,
    pub violations: Vec<StructureViolation>,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Every monomial must have total degree of the parity of `r` and at most `3r`.
pub fn structure_check(poly: &OffDiagPolynomial, r: usize) -> StructureReport {
    let mut violations = Vec::new();
    for (m, _) in poly.terms() {
        let d = m.degree();
        let mut reasons = Vec::new();
        if d % 2 != r % 2 {
            reasons.push("parity");
        }
        if d > 3 * r {
            reasons.push("degree");
        }
        if !reasons.is_empty() {
            violations.push(StructureViolation {
                monomial: render_monomial(m),
                degree: d,
                reason: reasons.join("+"),
            });
        }
    }
    StructureReport {
        order: r,
        max_degree: 3 * r,
        violations,
    }
}

fn render_monomial(m: &Monomial) -> String {
    let one = OffDiagPolynomial::monomial(m.clone(), TensorScalar::one());
    one.render_golden()
        .trim_end()
        .trim_start_matches("1/1*pi^0 | ")
        .to_string()
}

/// Degrees present in `poly`, ascending.
pub fn degrees(poly: &OffDiagPolynomial) -> Vec<usize> {
    let mut d: Vec<usize> = poly.terms().map(|(m, _)| m.degree()).collect();
    d.sort_unstable();
    d.dedup();
    d
}

/// Monomials on which two polynomials disagree, with both coefficients.
pub fn mismatches(a: &OffDiagPolynomial, b: &OffDiagPolynomial) -> Vec<String> {
    let diff = a - b;
    diff.terms()
        .map(|(m, _)| {
            format!(
                "{}: {} vs {}",
                render_monomial(m),
                a.coefficient(m),
                b.coefficient(m)
            )
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedCheck {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of the full symbolic verification at dimension `n`.
#[derive(Clone, Debug, Serialize)]
pub struct J2Verification {
    pub dim: usize,
    pub equal: bool,
    pub num_terms: usize,
    pub mismatches: Vec<String>,
    pub checks: Vec<NamedCheck>,
    #[serde(skip)]
    pub computed: OffDiagPolynomial,
    #[serde(skip)]
    pub reference: OffDiagPolynomial,
}

impl J2Verification {
    pub fn passed(&self) -> bool {
        self.equal && self.checks.iter().all(|c| c.passed)
    }
}

fn equality_check(id: &str, got: &OffDiagPolynomial, want: &OffDiagPolynomial) -> NamedCheck {
    let m = mismatches(got, want);
    NamedCheck {
        id: id.to_string(),
        passed: m.is_empty(),
        detail: if m.is_empty() {
            format!("{} terms agree", got.len())
        } else {
            format!("{} mismatched monomials, first: {}", m.len(), m[0])
        },
    }
}

/// Runs the `J_2` derivation against the closed form, plus the intermediate
/// identities, the diagonal value, the structure constraints and the
/// degree-two cancellation of the combined coefficient.
pub fn verify_j2(n: usize) -> Result<J2Verification> {
    let op = O2TildeOperator::new(n);
    let o2_image = resolve_against_p(&op.riemann_kernel()?)?;
    let bundle_image = -resolve_against_p(&op.bundle_kernel()?)?;
    let computed = compute_j2(n)?;
    let reference = reference_j2(n);

    let mut checks = vec![
        equality_check(
            "o2-image-expanded",
            &o2_image,
            &reference::o2_image_expanded(n),
        ),
        equality_check("o2-image", &o2_image, &reference::o2_image(n)),
        equality_check(
            "o2-image-adjoint",
            &o2_image.adjoint(),
            &reference::o2_image_adjoint(n),
        ),
        equality_check("bundle-image", &bundle_image, &reference::bundle_image(n)),
        equality_check(
            "bundle-image-adjoint",
            &bundle_image.adjoint(),
            &reference::bundle_image_adjoint(n),
        ),
        equality_check("j2-self-adjoint", &computed.adjoint(), &computed),
    ];

    let diag = computed.constant_term();
    let want = diagonal_coefficient(n);
    checks.push(NamedCheck {
        id: "j2-diagonal-value".into(),
        passed: diag == want,
        detail: format!("J2(0,0) = {diag}"),
    });

    let report = structure_check(&computed, 2);
    checks.push(NamedCheck {
        id: "j2-parity-degree".into(),
        passed: report.passed(),
        detail: format!(
            "{} violations, degrees {:?}",
            report.violations.len(),
            degrees(&computed)
        ),
    });

    let combined = combined_p_inverse_coefficient(n)?.drop_bundle_terms();
    let d = degrees(&combined);
    checks.push(NamedCheck {
        id: "combined-quartic-plus-constant".into(),
        passed: combined.homogeneous_part(2).is_zero() && d.iter().all(|&x| x == 0 || x == 4),
        detail: format!("degrees {d:?}"),
    });

    let mm = mismatches(&computed, &reference);
    Ok(J2Verification {
        dim: n,
        equal: mm.is_empty(),
        num_terms: computed.len(),
        mismatches: mm,
        checks,
        computed,
        reference,
    })
}
