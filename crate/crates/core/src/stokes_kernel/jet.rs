use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::polykernel::{int, to_f64, trim, FactoredForm, WendlandPolynomial};

use super::diffop::{radial_expansion, DiffOp, MAX_ORDER};

/// `sum_e c_e r^e` over a contiguous range of integer exponents, possibly
/// negative. Repeated divided derivatives of a Wendland polynomial leave this
/// form once the odd coefficients stop vanishing.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    lowest: i32,
    coeffs: Vec<BigRational>,
    form: FactoredForm,
}

impl RadialProfile {
    fn new(lowest: i32, coeffs: Vec<BigRational>) -> Self {
        let coeffs = trim(coeffs);
        let form = FactoredForm::new(lowest, &coeffs);
        RadialProfile {
            lowest,
            coeffs,
            form,
        }
    }

    fn from_polynomial(p: &WendlandPolynomial) -> Self {
        Self::new(0, p.coeffs().to_vec())
    }

    /// `(1/r) d/dr`, term by term: `r^e -> e r^(e-2)`.
    fn divided(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * int(self.lowest as i64 + i as i64))
            .collect();
        Self::new(self.lowest - 2, coeffs)
    }

    /// Coefficient of `r^e`.
    pub fn coeff(&self, e: i32) -> BigRational {
        let i = e - self.lowest;
        if i < 0 {
            return BigRational::zero();
        }
        self.coeffs
            .get(i as usize)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// Whether no negative powers of `r` occur.
    pub fn is_polynomial(&self) -> bool {
        (self.lowest..0).all(|e| self.coeff(e).is_zero())
    }

    /// The polynomial this profile equals, when it is one.
    pub fn to_polynomial(&self, smoothness: u32, ell: u32) -> Option<WendlandPolynomial> {
        if !self.is_polynomial() {
            return None;
        }
        let top = self.lowest + self.coeffs.len() as i32;
        let coeffs = (0..top.max(0)).map(|e| self.coeff(e)).collect();
        Some(WendlandPolynomial::from_coefficients(coeffs, smoothness, ell))
    }

    /// Value at `r > 0`; zero for `r >= 1`.
    pub fn eval(&self, r: f64) -> f64 {
        self.form.eval(r)
    }
}

/// The divided-derivative profiles `D^s psi`, `s = 0..=max_order`, of a
/// Wendland polynomial `psi`. Every mixed partial of `psi(|z|)` up to order
/// `max_order` is a sum of monomials in `z` times these profiles.
#[derive(Clone, Debug)]
pub struct RadialJet {
    base: WendlandPolynomial,
    max_order: usize,
    profiles: Vec<RadialProfile>,
    origin: Vec<f64>,
}

/// Build the jet of `p` for derivatives up to `max_order`.
///
/// A nonzero odd coefficient `b_i` makes `p(|z|)` only `C^(i-1)` at the
/// origin, so `max_order` must stay below the first such index; otherwise
/// [`Error::NonPolynomialDivision`] is returned.
pub fn build_jet(p: &WendlandPolynomial, max_order: usize) -> Result<RadialJet> {
    if let Some(i) = p.first_odd_index() {
        if i <= max_order {
            return Err(Error::NonPolynomialDivision {
                constant_term: format!("b_{i} = {}", p.coeff(i)),
            });
        }
    }
    if max_order > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "derivative order {max_order} exceeds supported maximum {MAX_ORDER}"
        )));
    }
    let mut profiles = vec![RadialProfile::from_polynomial(p)];
    for _ in 0..max_order {
        let next = profiles.last().unwrap().divided();
        profiles.push(next);
    }
    let origin = profiles.iter().map(|pr| to_f64(&pr.coeff(0))).collect();
    Ok(RadialJet {
        base: p.clone(),
        max_order,
        profiles,
        origin,
    })
}

impl RadialJet {
    pub fn base(&self) -> &WendlandPolynomial {
        &self.base
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// `D^s psi`.
    pub fn profile(&self, s: usize) -> &RadialProfile {
        &self.profiles[s]
    }

    /// `D^s psi` at `r`. At `r = 0` this is the constant coefficient; that
    /// is the only part that survives in a radial expansion term at the
    /// origin, because every term carrying negative powers of `r` also
    /// carries a vanishing monomial.
    pub fn profile_value(&self, s: usize, r: f64) -> f64 {
        if r == 0.0 {
            self.origin[s]
        } else {
            self.profiles[s].eval(r)
        }
    }

    pub(crate) fn fill_values(&self, r: f64, upto: usize, out: &mut [f64]) {
        if r == 0.0 {
            out[..=upto].copy_from_slice(&self.origin[..=upto]);
        } else {
            for (s, v) in out.iter_mut().enumerate().take(upto + 1) {
                *v = self.profiles[s].eval(r);
            }
        }
    }

    /// `(d^alpha psi)(0)` in exact arithmetic for an integer operator.
    pub fn origin_value_exact(&self, op: &DiffOp<i64>) -> Result<BigRational> {
        if op.order() > self.max_order {
            return Err(Error::InvalidArgument(format!(
                "operator of order {} exceeds jet order {}",
                op.order(),
                self.max_order
            )));
        }
        let mut total = BigRational::zero();
        for ((a1, a2), c) in op.terms() {
            for t in radial_expansion(a1, a2) {
                if t.m1 == 0 && t.m2 == 0 {
                    total += self.profiles[t.s as usize].coeff(0) * int(c * t.coeff);
                }
            }
        }
        Ok(total)
    }

    /// Unscaled `(d^alpha psi)(z)` for a single multi-index, straight from the
    /// expansion (used for checks; the assembly path uses compiled operators).
    pub fn partial(&self, a1: u32, a2: u32, z: [f64; 2]) -> f64 {
        let r = z[0].hypot(z[1]);
        if r >= 1.0 {
            return 0.0;
        }
        radial_expansion(a1, a2)
            .iter()
            .map(|t| {
                t.coeff as f64
                    * z[0].powi(t.m1 as i32)
                    * z[1].powi(t.m2 as i32)
                    * self.profile_value(t.s as usize, r)
            })
            .sum()
    }
}
