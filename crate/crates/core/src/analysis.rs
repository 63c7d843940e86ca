//! Manufactured solutions, error norms, condition numbers and scaling fits.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{extreme_eigenvalues_dense, extreme_eigenvalues_iterative, Cholesky, DenseMatrix};

/// A closed-form Stokes solution on the unit square with the forcing it
/// induces.
#[derive(Clone, Copy, Debug)]
pub struct ManufacturedSolution {
    pub nu: f64,
    pub u: fn(Point) -> [f64; 2],
    pub p: fn(Point) -> f64,
    pub grad_p: fn(Point) -> [f64; 2],
    /// Componentwise Laplacian of `u`.
    pub laplacian_u: fn(Point) -> [f64; 2],
}

impl ManufacturedSolution {
    /// `-nu * laplacian(u) + grad(p)`.
    pub fn f(&self, x: Point) -> [f64; 2] {
        let l = (self.laplacian_u)(x);
        let g = (self.grad_p)(x);
        [-self.nu * l[0] + g[0], -self.nu * l[1] + g[1]]
    }

    /// Boundary data: the restriction of `u`.
    pub fn g(&self, x: Point) -> [f64; 2] {
        (self.u)(x)
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }
}

fn test_u(x: Point) -> [f64; 2] {
    [
        2.0 * (5.0 * x[0]).cos() * (2.0 * x[1]).cos(),
        5.0 * (5.0 * x[0]).sin() * (2.0 * x[1]).sin(),
    ]
}

fn test_p(x: Point) -> f64 {
    (3.0 * x[0]).sin() * (3.0 * x[1]).sin()
}

fn test_grad_p(x: Point) -> [f64; 2] {
    [
        3.0 * (3.0 * x[0]).cos() * (3.0 * x[1]).sin(),
        3.0 * (3.0 * x[0]).sin() * (3.0 * x[1]).cos(),
    ]
}

fn test_laplacian_u(x: Point) -> [f64; 2] {
    let u = test_u(x);
    [-29.0 * u[0], -29.0 * u[1]]
}

/// The benchmark flow: `u = (2 cos 5x cos 2y, 5 sin 5x sin 2y)`,
/// `p = sin 3x sin 3y`, `nu = 1`.
pub fn benchmark_problem() -> ManufacturedSolution {
    ManufacturedSolution {
        nu: 1.0,
        u: test_u,
        p: test_p,
        grad_p: test_grad_p,
        laplacian_u: test_laplacian_u,
    }
}

/// The benchmark forcing written out, for `nu = 1`.
pub fn benchmark_forcing(x: Point) -> [f64; 2] {
    let (c5, s5) = ((5.0 * x[0]).cos(), (5.0 * x[0]).sin());
    [
        58.0 * c5 * (2.0 * x[1]).cos() + 3.0 * (3.0 * x[0]).cos() * (3.0 * x[1]).sin(),
        145.0 * s5 * (2.0 * x[1]).sin() + 3.0 * (3.0 * x[0]).sin() * (3.0 * x[1]).cos(),
    ]
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Tensor Gauss-Legendre rule on the unit square.
#[derive(Clone, Debug)]
pub struct TensorQuadrature {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl TensorQuadrature {
    pub fn unit_square(per_dim: usize) -> Self {
        let (t, w) = gauss_legendre(per_dim);
        let x: Vec<f64> = t.iter().map(|t| 0.5 * (t + 1.0)).collect();
        let w: Vec<f64> = w.iter().map(|w| 0.5 * w).collect();
        let mut points = Vec::with_capacity(per_dim * per_dim);
        let mut weights = Vec::with_capacity(per_dim * per_dim);
        for j in 0..per_dim {
            for i in 0..per_dim {
                points.push([x[i], x[j]]);
                weights.push(w[i] * w[j]);
            }
        }
        TensorQuadrature { points, weights }
    }
}

/// Which part of a Stokes solution an error refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Velocity,
    PressureGradient,
}

/// L2 and max norms of a vector field sampled at one set of points.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
}

/// Both norms of an error field on the tensor Gauss-Legendre grid, the max
/// norm taken over the same nodes.
pub fn error_norms<F>(error: F, per_dim: usize) -> Result<Norms>
where
    F: Fn(Point) -> Vec<f64> + Sync,
{
    if per_dim < 2 {
        return Err(Error::InvalidArgument("quadrature needs at least 2 points per dimension".into()));
    }
    let q = TensorQuadrature::unit_square(per_dim);
    let squares: Vec<f64> = q
        .points
        .par_iter()
        .map(|&x| error(x).iter().map(|v| v * v).sum())
        .collect();
    // Sequential reduction keeps the result independent of thread count.
    let (mut sum, mut max) = (0.0f64, 0.0f64);
    for (sq, w) in squares.iter().zip(&q.weights) {
        sum += w * sq;
        max = max.max(sq.sqrt());
    }
    Ok(Norms {
        l2: sum.sqrt(),
        linf: max,
    })
}

pub fn l2_error<F>(error: F, per_dim: usize) -> Result<f64>
where
    F: Fn(Point) -> Vec<f64> + Sync,
{
    Ok(error_norms(error, per_dim)?.l2)
}

/// Largest pointwise Euclidean norm of the error over the tensor
/// Gauss-Legendre nodes.
pub fn linf_error<F>(error: F, per_dim: usize) -> Result<f64>
where
    F: Fn(Point) -> Vec<f64> + Sync,
{
    Ok(error_norms(error, per_dim)?.linf)
}

/// `lambda_max / lambda_min`, from a full eigendecomposition up to
/// `dense_limit` unknowns and power/inverse iteration beyond.
pub fn condition_number(matrix: &DenseMatrix) -> Result<f64> {
    condition_number_with(matrix, 3000)
}

pub fn condition_number_with(matrix: &DenseMatrix, dense_limit: usize) -> Result<f64> {
    let (lo, hi) = extreme_eigenvalues(matrix, dense_limit)?;
    Ok(hi / lo)
}

/// `(lambda_min, lambda_max)`; fails when `lambda_min <= 0`.
pub fn extreme_eigenvalues(matrix: &DenseMatrix, dense_limit: usize) -> Result<(f64, f64)> {
    let (lo, hi) = if matrix.dim() <= dense_limit {
        extreme_eigenvalues_dense(matrix)
    } else {
        extreme_eigenvalues_iterative(matrix, 1e-6, 10_000)?
    };
    if !(lo > 0.0) {
        // Report the pivot a factorization trips on, if any.
        let pivot = match Cholesky::factor(matrix) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => pivot,
            _ => 0,
        };
        return Err(Error::NotPositiveDefinite { pivot, value: lo });
    }
    Ok((lo, hi))
}

/// Least-squares exponent of a power law `kappa ~ h^-slope`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    /// The theoretical bound on the exponent, `2 tau`.
    pub ceiling: f64,
}

pub fn slope_check(levels: &[(f64, f64)], tau: f64) -> Result<SlopeFit> {
    if levels.len() < 3 {
        return Err(Error::InvalidArgument("a slope fit needs at least 3 levels".into()));
    }
    let pts: Vec<(f64, f64)> = levels.iter().map(|&(h, k)| ((1.0 / h).ln(), k.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(SlopeFit {
        slope: sxy / sxx,
        ceiling: 2.0 * tau,
    })
}

/// Per-level errors of a multilevel run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorReport {
    pub deltas: Vec<f64>,
    pub velocity: Vec<Norms>,
    pub pressure_gradient: Vec<Norms>,
    pub quad_points: usize,
    pub condition_numbers: Vec<Option<f64>>,
}

impl ErrorReport {
    pub fn levels(&self) -> usize {
        self.deltas.len()
    }

    /// CSV with one row per quantity and one column per level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity");
        for j in 1..=self.levels() {
            let _ = write!(out, ",level_{j}");
        }
        out.push('\n');
        let mut row = |name: &str, vals: Vec<f64>| {
            out.push_str(name);
            for v in vals {
                out.push(',');
                out.push_str(&sci4(v));
            }
            out.push('\n');
        };
        row("delta", self.deltas.clone());
        row("velocity_l2", self.velocity.iter().map(|n| n.l2).collect());
        row("velocity_linf", self.velocity.iter().map(|n| n.linf).collect());
        row("grad_p_l2", self.pressure_gradient.iter().map(|n| n.l2).collect());
        row("grad_p_linf", self.pressure_gradient.iter().map(|n| n.linf).collect());
        if self.condition_numbers.iter().any(Option::is_some) {
            out.push_str("kappa");
            for k in &self.condition_numbers {
                out.push(',');
                if let Some(k) = k {
                    out.push_str(&sci4(*k));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Scientific notation with four significant digits, e.g. `1.592e-02`.
pub fn sci4(v: f64) -> String {
    let s = format!("{v:.3e}");
    match s.split_once('e') {
        Some((m, e)) => {
            let (sign, digits) = match e.strip_prefix('-') {
                Some(d) => ("-", d),
                None => ("+", e),
            };
            format!("{m}e{sign}{digits:0>2}")
        }
        None => s,
    }
}
