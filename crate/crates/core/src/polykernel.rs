//! Wendland compactly supported radial functions with exact rational
//! coefficients, plus the univariate calculus the kernel algebra is built on.
//!
//! A [`WendlandPolynomial`] stores the expansion `sum_i b_i r^i` on `[0, 1]`
//! and is identically zero for `r >= 1`. All coefficient arithmetic is exact;
//! floating point only appears when a value is evaluated.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A univariate piecewise polynomial `r -> sum_i b_i r^i` on `[0, 1]`,
/// zero for `r >= 1`.
#[derive(Clone, PartialEq)]
pub struct WendlandPolynomial {
    coeffs: Vec<BigRational>,
    smoothness: u32,
    ell: u32,
    form: FactoredForm,
}

impl WendlandPolynomial {
    /// Build from exact coefficients ordered by degree. `smoothness` and `ell`
    /// are carried as metadata describing the generating Wendland function.
    pub fn from_coefficients(coeffs: Vec<BigRational>, smoothness: u32, ell: u32) -> Self {
        let coeffs = trim(coeffs);
        let form = FactoredForm::new(0, &coeffs);
        WendlandPolynomial {
            coeffs,
            smoothness,
            ell,
            form,
        }
    }

    /// Convenience constructor from integer coefficients.
    pub fn from_integers(coeffs: &[i64], smoothness: u32, ell: u32) -> Self {
        let coeffs = coeffs.iter().map(|&c| int(c)).collect();
        Self::from_coefficients(coeffs, smoothness, ell)
    }

    /// Coefficients `b_0, b_1, ...` (trailing zeros removed; the zero
    /// polynomial has no coefficients).
    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// `b_i`, zero past the degree.
    pub fn coeff(&self, i: usize) -> BigRational {
        self.coeffs.get(i).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Smoothness parameter `k` of the generating Wendland function.
    pub fn smoothness(&self) -> u32 {
        self.smoothness
    }

    /// `ell = floor(d/2) + k + 1` of the generating Wendland function.
    pub fn ell(&self) -> u32 {
        self.ell
    }

    /// Index of the first nonzero odd coefficient, if any. A radial function
    /// built from this polynomial is `C^m` at the origin for every `m` below
    /// this index.
    pub fn first_odd_index(&self) -> Option<usize> {
        self.coeffs
            .iter()
            .enumerate()
            .find(|(i, c)| i % 2 == 1 && !c.is_zero())
            .map(|(i, _)| i)
    }

    /// Evaluate at `r >= 0`. Returns 0 for `r >= 1`.
    pub fn eval(&self, r: f64) -> f64 {
        self.form.eval(r)
    }

    /// Exact evaluation at a rational point. Returns 0 for `r >= 1`.
    pub fn eval_exact(&self, r: &BigRational) -> BigRational {
        if *r >= BigRational::one() {
            return BigRational::zero();
        }
        self.coeffs
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * r + c)
    }

    /// `d/dr` of the polynomial part.
    pub fn differentiate(&self) -> WendlandPolynomial {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * int(i as i64))
            .collect();
        Self::from_coefficients(coeffs, self.smoothness, self.ell)
    }

    /// `f'(r) / r` as an exact polynomial.
    ///
    /// Fails with [`Error::NonPolynomialDivision`] when `f'(0) = b_1` is not
    /// zero, since the quotient would then carry a `1/r` term.
    pub fn divided_derivative(&self) -> Result<WendlandPolynomial> {
        let b1 = self.coeff(1);
        if !b1.is_zero() {
            return Err(Error::NonPolynomialDivision {
                constant_term: b1.to_string(),
            });
        }
        // (sum_i b_i r^i)' / r = sum_{i>=2} i b_i r^{i-2}
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, c)| c * int(i as i64))
            .collect();
        Ok(Self::from_coefficients(coeffs, self.smoothness, self.ell))
    }

    /// Expanded coefficients formatted as exact integers or fractions.
    pub fn coefficient_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(|c| c.to_string()).collect()
    }
}

impl fmt::Debug for WendlandPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WendlandPolynomial")
            .field("coeffs", &self.coefficient_strings())
            .field("smoothness", &self.smoothness)
            .field("ell", &self.ell)
            .finish()
    }
}

/// Wendland function `psi_{ell,k}` for dimension `d`, expanded exactly from
///
/// `psi(r) = 1/(Gamma(k) 2^(k-1)) * int_r^1 s (1-s)^ell (s^2 - r^2)^(k-1) ds`
///
/// with `ell = floor(d/2) + k + 1`.
pub fn wendland_from_integral(d: u32, k: u32) -> Result<WendlandPolynomial> {
    if d == 0 {
        return Err(Error::UnsupportedDimension { d });
    }
    if k == 0 {
        return Err(Error::UnsupportedSmoothness { k });
    }
    let ell = d / 2 + k + 1;
    let degree = (2 * k + ell) as usize;
    let mut coeffs = vec![BigRational::zero(); degree + 1];

    // (s^2 - r^2)^(k-1) = sum_j C(k-1, j) s^(2j) (-1)^(k-1-j) r^(2(k-1-j))
    // (1 - s)^ell       = sum_m C(ell, m) (-1)^m s^m
    // int_r^1 s^n ds    = (1 - r^(n+1)) / (n+1)
    for j in 0..k {
        for m in 0..=ell {
            let sign = if (m + k - 1 - j) % 2 == 0 { 1 } else { -1 };
            let weight = BigRational::from_integer(
                binomial(k - 1, j) * binomial(ell, m) * BigInt::from(sign),
            );
            let r_power = (2 * (k - 1 - j)) as usize;
            let n = (2 * j + m + 1) as usize;
            let term = weight / int((n + 1) as i64);
            coeffs[r_power] += &term;
            coeffs[r_power + n + 1] -= &term;
        }
    }
    let norm = BigRational::from_integer(factorial(k - 1) * BigInt::from(2).pow(k - 1));
    let coeffs = coeffs.into_iter().map(|c| c / &norm).collect();
    Ok(WendlandPolynomial::from_coefficients(coeffs, k, ell))
}

/// The C^8 Wendland function on R^2 in its closed form
/// `(1 - r)^10 (429 r^4 + 450 r^3 + 210 r^2 + 50 r + 5)`, expanded.
pub fn wendland_c8() -> WendlandPolynomial {
    let factor = [5, 50, 210, 450, 429].map(int);
    let mut coeffs = factor.to_vec();
    for _ in 0..10 {
        coeffs = mul_one_minus_r(&coeffs);
    }
    WendlandPolynomial::from_coefficients(coeffs, 4, 6)
}

/// Stable floating point evaluation form `r^shift (1 - r)^support_order core(r)`
/// of an exact Laurent polynomial, obtained by dividing out every factor
/// `(1 - r)` exactly before rounding.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct FactoredForm {
    shift: i32,
    support_order: u32,
    core: Vec<f64>,
}

impl FactoredForm {
    /// `coeffs[i]` multiplies `r^(lowest + i)`.
    pub(crate) fn new(lowest: i32, coeffs: &[BigRational]) -> Self {
        let lead = coeffs.iter().position(|c| !c.is_zero());
        let Some(lead) = lead else {
            return FactoredForm {
                shift: 0,
                support_order: 0,
                core: Vec::new(),
            };
        };
        let mut poly: Vec<BigRational> = trim(coeffs[lead..].to_vec());
        let mut support_order = 0;
        while poly.len() > 1 && poly.iter().sum::<BigRational>().is_zero() {
            poly = div_one_minus_r(&poly);
            support_order += 1;
        }
        FactoredForm {
            shift: lowest + lead as i32,
            support_order,
            core: poly.iter().map(to_f64).collect(),
        }
    }

    /// Value at `r > 0`; zero for `r >= 1`. At `r = 0` the caller decides
    /// (terms with negative `shift` have no finite value there).
    pub(crate) fn eval(&self, r: f64) -> f64 {
        if r >= 1.0 || self.core.is_empty() {
            return 0.0;
        }
        let core = self.core.iter().rev().fold(0.0, |acc, &c| acc * r + c);
        let support = (1.0 - r).powi(self.support_order as i32);
        let scale = if self.shift == 0 { 1.0 } else { r.powi(self.shift) };
        scale * support * core
    }
}

pub(crate) fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub(crate) fn to_f64(c: &BigRational) -> f64 {
    // Direct numer/denom conversion overflows for large denominators.
    c.to_f64().unwrap_or_else(|| {
        let n = c.numer().to_f64().unwrap_or(f64::NAN);
        let d = c.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub(crate) fn trim(mut coeffs: Vec<BigRational>) -> Vec<BigRational> {
    while coeffs.last().is_some_and(|c| c.is_zero()) {
        coeffs.pop();
    }
    coeffs
}

fn mul_one_minus_r(p: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); p.len() + 1];
    for (i, c) in p.iter().enumerate() {
        out[i] += c;
        out[i + 1] -= c;
    }
    out
}

/// Exact quotient `p / (1 - r)`; the caller guarantees `p(1) = 0`.
fn div_one_minus_r(p: &[BigRational]) -> Vec<BigRational> {
    // Synthetic division by (r - 1), then negate.
    let n = p.len() - 1;
    let mut q = vec![BigRational::zero(); n];
    let mut carry = BigRational::zero();
    for i in (1..=n).rev() {
        carry = &carry + &p[i];
        q[i - 1] = -carry.clone();
    }
    debug_assert!((carry + &p[0]).is_zero());
    q
}

fn binomial(n: u32, k: u32) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}
