//! Constant-coefficient differential operators in two variables and their
//! expansion into radial terms.
//!
//! For a radial function `F(z) = f(|z|)` and `D = (1/r) d/dr` we have
//! `d_i [z^m (D^s f)(r)] = m_i z^(m - e_i) (D^s f)(r) + z^(m + e_i) (D^(s+1) f)(r)`,
//! so every mixed partial `d^alpha F` is a finite integer combination of
//! terms `z1^a z2^b (D^s f)(r)` with `2s - (a + b) = |alpha|`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg};
use std::sync::OnceLock;

use num_traits::{One, Zero};

/// Largest total derivative order the expansion table covers.
pub const MAX_ORDER: usize = 8;

/// A constant-coefficient operator `sum_alpha c_alpha d1^alpha1 d2^alpha2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffOp<T> {
    terms: BTreeMap<(u32, u32), T>,
}

impl<T> DiffOp<T>
where
    T: Copy + Zero + One + PartialEq + Add<Output = T> + Mul<Output = T> + Neg<Output = T>,
{
    pub fn zero() -> Self {
        DiffOp {
            terms: BTreeMap::new(),
        }
    }

    pub fn identity() -> Self {
        Self::monomial(0, 0, T::one())
    }

    pub fn monomial(a1: u32, a2: u32, coeff: T) -> Self {
        let mut op = Self::zero();
        op.add_term(a1, a2, coeff);
        op
    }

    /// `d_axis`, with `axis` 0 or 1.
    pub fn partial(axis: usize) -> Self {
        match axis {
            0 => Self::monomial(1, 0, T::one()),
            1 => Self::monomial(0, 1, T::one()),
            _ => panic!("axis {axis} out of range for d = 2"),
        }
    }

    pub fn laplacian() -> Self {
        let mut op = Self::monomial(2, 0, T::one());
        op.add_term(0, 2, T::one());
        op
    }

    fn add_term(&mut self, a1: u32, a2: u32, coeff: T) {
        let entry = self.terms.entry((a1, a2)).or_insert_with(T::zero);
        *entry = *entry + coeff;
        if *entry == T::zero() {
            self.terms.remove(&(a1, a2));
        }
    }

    pub fn scale(&self, factor: T) -> Self {
        let mut out = Self::zero();
        for (&(a1, a2), &c) in &self.terms {
            out.add_term(a1, a2, c * factor);
        }
        out
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(a1, a2), &c) in &other.terms {
            out.add_term(a1, a2, c);
        }
        out
    }

    pub fn compose(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(a1, a2), &c) in &self.terms {
            for (&(b1, b2), &d) in &other.terms {
                out.add_term(a1 + b1, a2 + b2, c * d);
            }
        }
        out
    }

    /// The operator acting on the second argument of `F(x - y)`: every
    /// derivative of odd order changes sign.
    pub fn reflect(&self) -> Self {
        let mut out = Self::zero();
        for (&(a1, a2), &c) in &self.terms {
            let c = if (a1 + a2) % 2 == 1 { -c } else { c };
            out.add_term(a1, a2, c);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn order(&self) -> usize {
        self.terms.keys().map(|&(a, b)| (a + b) as usize).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), T)> + '_ {
        self.terms.iter().map(|(&k, &v)| (k, v))
    }
}

/// One term `coeff * z1^m1 * z2^m2 * (D^s f)(r)` of a radial expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RadialTerm {
    pub m1: u32,
    pub m2: u32,
    pub s: u32,
    pub coeff: i64,
}

impl RadialTerm {
    /// Total derivative order `|alpha| = 2s - |m|` that produced this term.
    pub fn order(&self) -> u32 {
        2 * self.s - self.m1 - self.m2
    }
}

/// Radial expansion of `d1^a1 d2^a2`, for `a1 + a2 <= MAX_ORDER`.
pub fn radial_expansion(a1: u32, a2: u32) -> &'static [RadialTerm] {
    assert!((a1 + a2) as usize <= MAX_ORDER, "derivative order too large");
    let table = EXPANSIONS.get_or_init(build_expansions);
    &table[a1 as usize][a2 as usize]
}

static EXPANSIONS: OnceLock<Vec<Vec<Vec<RadialTerm>>>> = OnceLock::new();

fn build_expansions() -> Vec<Vec<Vec<RadialTerm>>> {
    let n = MAX_ORDER + 1;
    let mut table = vec![vec![Vec::new(); n]; n];
    for a1 in 0..n {
        for a2 in 0..n - a1 {
            let mut terms: BTreeMap<(u32, u32, u32), i64> = BTreeMap::new();
            terms.insert((0, 0, 0), 1);
            for _ in 0..a1 {
                terms = apply_partial(&terms, 0);
            }
            for _ in 0..a2 {
                terms = apply_partial(&terms, 1);
            }
            table[a1][a2] = terms
                .into_iter()
                .map(|((m1, m2, s), coeff)| RadialTerm { m1, m2, s, coeff })
                .collect();
        }
    }
    table
}

fn apply_partial(
    terms: &BTreeMap<(u32, u32, u32), i64>,
    axis: usize,
) -> BTreeMap<(u32, u32, u32), i64> {
    let mut out = BTreeMap::new();
    let mut push = |key: (u32, u32, u32), c: i64| {
        let e = out.entry(key).or_insert(0);
        *e += c;
        if *e == 0 {
            out.remove(&key);
        }
    };
    for (&(m1, m2, s), &c) in terms {
        let mi = if axis == 0 { m1 } else { m2 };
        if mi > 0 {
            let key = if axis == 0 { (m1 - 1, m2, s) } else { (m1, m2 - 1, s) };
            push(key, c * mi as i64);
        }
        let key = if axis == 0 { (m1 + 1, m2, s + 1) } else { (m1, m2 + 1, s + 1) };
        push(key, c);
    }
    out
}
