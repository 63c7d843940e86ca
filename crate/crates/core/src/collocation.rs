//! Single-level symmetric collocation: assembly, solve and evaluation.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BucketGrid, LevelPointSet, Point};
use crate::linalg::{dot, norm2, Cholesky, DenseMatrix};
use crate::stokes_kernel::{
    sub, CollocationFunctional, ColumnFields, FieldRequest, FunctionalKind, StokesKernel,
};

/// Right-hand side data evaluated at collocation points.
pub trait VectorField: Sync {
    fn eval(&self, x: Point) -> [f64; 2];
}

impl<F: Fn(Point) -> [f64; 2] + Sync> VectorField for F {
    fn eval(&self, x: Point) -> [f64; 2] {
        self(x)
    }
}

/// The symmetric system `A b = (f, g)`.
#[derive(Clone, Debug)]
pub struct CollocationSystem {
    pub functionals: Vec<CollocationFunctional>,
    pub matrix: DenseMatrix,
    pub rhs: Vec<f64>,
    pub kernel: Arc<StokesKernel>,
    pub pointset: Option<LevelPointSet>,
}

/// Canonical row order: PDE component 1 over all interior centres, then PDE
/// component 2, then the Dirichlet rows in the same component-major order.
pub fn functionals_for(pointset: &LevelPointSet) -> Vec<CollocationFunctional> {
    let mut out = Vec::with_capacity(pointset.unknowns());
    for c in 0..2 {
        out.extend(pointset.interior.iter().map(|&p| CollocationFunctional::pde(c, p)));
    }
    for c in 0..2 {
        out.extend(pointset.boundary.iter().map(|&p| CollocationFunctional::dirichlet(c, p)));
    }
    out
}

pub fn assemble(
    pointset: &LevelPointSet,
    kernel: Arc<StokesKernel>,
    f_data: &dyn VectorField,
    g_data: &dyn VectorField,
) -> CollocationSystem {
    let functionals = functionals_for(pointset);
    let mut system = assemble_functionals(functionals, kernel, f_data, g_data);
    system.pointset = Some(pointset.clone());
    system
}

/// Assemble for an arbitrary ordered list of functionals. Entries between
/// centres farther apart than the kernel support are left at zero.
pub fn assemble_functionals(
    functionals: Vec<CollocationFunctional>,
    kernel: Arc<StokesKernel>,
    f_data: &dyn VectorField,
    g_data: &dyn VectorField,
) -> CollocationSystem {
    let n = functionals.len();
    let delta = kernel.delta();
    let points: Vec<Point> = functionals.iter().map(|f| f.point).collect();
    let grid = BucketGrid::new(&points, delta);

    let mut matrix = DenseMatrix::zeros(n);
    matrix
        .rows_mut()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .for_each_init(Vec::new, |near, (r, row)| {
            let a = &functionals[r];
            grid.within(a.point, delta, &points, near);
            for &c in near.iter().filter(|&&c| c <= r) {
                let b = &functionals[c];
                // Orient each pair canonically so that any ordering of the
                // functionals yields bitwise the same entries.
                row[c] = if canonical_cmp(a, b).is_le() {
                    kernel.gram_entry(a, b)
                } else {
                    kernel.gram_entry(b, a)
                };
            }
        });
    matrix.symmetrize_from_lower();

    let rhs = functionals
        .par_iter()
        .map(|f| match f.kind {
            FunctionalKind::Pde(i) => f_data.eval(f.point)[i],
            FunctionalKind::Dirichlet(i) => g_data.eval(f.point)[i],
        })
        .collect();

    CollocationSystem {
        functionals,
        matrix,
        rhs,
        kernel,
        pointset: None,
    }
}

/// Order by functional kind, then by point (y before x).
fn canonical_cmp(a: &CollocationFunctional, b: &CollocationFunctional) -> Ordering {
    a.kind
        .index()
        .cmp(&b.kind.index())
        .then(a.point[1].total_cmp(&b.point[1]))
        .then(a.point[0].total_cmp(&b.point[0]))
}

/// Solve by Cholesky factorization. A failed factorization is returned as
/// [`Error::NotPositiveDefinite`] (pivot index in the input ordering), never
/// regularized.
///
/// The factorization runs in a canonical ordering of the functionals, so
/// the coefficients do not depend on how the rows were listed. Rows are
/// equilibrated symmetrically by the inverse square roots of the diagonal,
/// since PDE and Dirichlet rows differ by many orders of magnitude. Up to
/// five steps of iterative refinement with compensated residuals follow.
pub fn solve(system: &CollocationSystem) -> Result<LevelSolution> {
    let a = &system.matrix;
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| canonical_cmp(&system.functionals[i], &system.functionals[j]));
    let scale: Vec<f64> = order
        .iter()
        .map(|&i| {
            let d = a.get(i, i);
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = DenseMatrix::zeros(n);
    scaled.rows_mut().enumerate().for_each(|(i, row)| {
        let src = a.row(order[i]);
        for (j, v) in row.iter_mut().enumerate() {
            *v = src[order[j]] * scale[i] * scale[j];
        }
    });
    let chol = Cholesky::factor_owned(scaled).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot, value } => Error::NotPositiveDefinite {
            pivot: order[pivot],
            value,
        },
        other => other,
    })?;
    let solve_scaled = |r: &[f64]| -> Vec<f64> {
        let rhs: Vec<f64> = r.iter().zip(&scale).map(|(r, s)| r * s).collect();
        chol.solve(&rhs).iter().zip(&scale).map(|(y, s)| y * s).collect()
    };
    let rhs: Vec<f64> = order.iter().map(|&i| system.rhs[i]).collect();
    let rhs_norm = norm2(&rhs);
    let relative = |r: &[f64]| {
        if rhs_norm == 0.0 {
            norm2(r)
        } else {
            norm2(r) / rhs_norm
        }
    };
    let mut x = solve_scaled(&rhs);
    let mut r = residual_vector(a, &order, &x, &rhs);
    let mut residual = relative(&r);
    for _ in 0..5 {
        if residual <= 1e-14 {
            break;
        }
        let corr = solve_scaled(&r);
        let refined: Vec<f64> = x.iter().zip(&corr).map(|(x, c)| x + c).collect();
        let refined_r = residual_vector(a, &order, &refined, &rhs);
        let refined_residual = relative(&refined_r);
        if refined_residual >= residual {
            break;
        }
        x = refined;
        r = refined_r;
        residual = refined_residual;
    }
    let mut coefficients = vec![0.0; n];
    for (k, &i) in order.iter().enumerate() {
        coefficients[i] = x[k];
    }
    Ok(LevelSolution::new(
        system.functionals.clone(),
        coefficients,
        system.kernel.clone(),
        system.pointset.clone(),
        residual,
    ))
}

/// `b - A x` in the permuted ordering, each row accumulated in compensated
/// arithmetic.
fn residual_vector(a: &DenseMatrix, order: &[usize], x: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.dim())
        .into_par_iter()
        .map(|i| {
            let row = a.row(order[i]);
            let (mut s, mut c) = (b[i], 0.0);
            for (&j, &xj) in order.iter().zip(x) {
                let p = -row[j] * xj;
                let pe = (-row[j]).mul_add(xj, -p);
                let t = s + p;
                let z = t - s;
                c += (s - (t - z)) + (p - z) + pe;
                s = t;
            }
            s + c
        })
        .collect()
}

/// Functionals sharing one centre, evaluated with a single kernel sample.
#[derive(Clone, Debug)]
struct Node {
    point: Point,
    terms: Vec<(FunctionalKind, f64)>,
}

/// Coefficients of one solved level together with everything needed to
/// evaluate the approximant.
#[derive(Clone, Debug)]
pub struct LevelSolution {
    pub functionals: Vec<CollocationFunctional>,
    pub coefficients: Vec<f64>,
    pub kernel: Arc<StokesKernel>,
    pub pointset: Option<LevelPointSet>,
    /// `||A b - rhs|| / ||rhs||` of the linear solve.
    pub relative_residual: f64,
    nodes: Vec<Node>,
    node_points: Vec<Point>,
    grid: BucketGrid,
}

impl LevelSolution {
    pub fn new(
        functionals: Vec<CollocationFunctional>,
        coefficients: Vec<f64>,
        kernel: Arc<StokesKernel>,
        pointset: Option<LevelPointSet>,
        relative_residual: f64,
    ) -> Self {
        assert_eq!(functionals.len(), coefficients.len());
        let mut index: HashMap<(u64, u64), usize> = HashMap::new();
        let mut nodes: Vec<Node> = Vec::new();
        for (f, &c) in functionals.iter().zip(&coefficients) {
            let key = (f.point[0].to_bits(), f.point[1].to_bits());
            let i = *index.entry(key).or_insert_with(|| {
                nodes.push(Node {
                    point: f.point,
                    terms: Vec::new(),
                });
                nodes.len() - 1
            });
            nodes[i].terms.push((f.kind, c));
        }
        // Fixed summation order, independent of how functionals were listed.
        nodes.sort_by(|a, b| {
            a.point[1]
                .total_cmp(&b.point[1])
                .then(a.point[0].total_cmp(&b.point[0]))
        });
        for node in &mut nodes {
            node.terms.sort_by_key(|t| t.0.index());
        }
        let node_points: Vec<Point> = nodes.iter().map(|n| n.point).collect();
        let grid = BucketGrid::new(&node_points, kernel.delta());
        LevelSolution {
            functionals,
            coefficients,
            kernel,
            pointset,
            relative_residual,
            nodes,
            node_points,
            grid,
        }
    }

    pub fn delta(&self) -> f64 {
        self.kernel.delta()
    }

    /// Velocity and pressure of the approximant at `x`.
    pub fn evaluate(&self, x: Point) -> ([f64; 2], f64) {
        let f = self.accumulate(x, false, false, false);
        (f.velocity, f.pressure)
    }

    /// Every field (velocity, pressure, L-image, divergence, pressure
    /// gradient) at `x`.
    pub fn evaluate_fields(&self, x: Point) -> ColumnFields {
        self.accumulate(x, true, true, true)
    }

    pub fn evaluate_field(&self, x: Point, request: FieldRequest) -> Vec<f64> {
        match request {
            FieldRequest::LImage => self.accumulate(x, true, false, false).l_image.to_vec(),
            FieldRequest::Divergence => vec![self.accumulate(x, false, false, true).divergence],
            FieldRequest::PressureGradient => {
                self.accumulate(x, false, true, false).grad_p.to_vec()
            }
        }
    }

    pub(crate) fn accumulate(&self, x: Point, l_image: bool, grad: bool, div: bool) -> ColumnFields {
        let mut out = ColumnFields::default();
        let mut near = Vec::new();
        self.grid.within(x, self.kernel.delta(), &self.node_points, &mut near);
        for &i in &near {
            let node = &self.nodes[i];
            let sample = self.kernel.sample(sub(x, node.point));
            for &(kind, coeff) in &node.terms {
                if coeff == 0.0 {
                    continue;
                }
                let col = self
                    .kernel
                    .column_fields_partial(kind, &sample, l_image, grad, div);
                out.add_scaled(&col, coeff);
            }
        }
        out
    }

    /// Dot product of the coefficient vector with itself, a quick size
    /// measure for diagnostics.
    pub fn coefficient_norm(&self) -> f64 {
        dot(&self.coefficients, &self.coefficients).sqrt()
    }
}

/// Solve a level whose data are given directly.
pub fn solve_level(
    pointset: &LevelPointSet,
    kernel: Arc<StokesKernel>,
    f_data: &dyn VectorField,
    g_data: &dyn VectorField,
) -> Result<LevelSolution> {
    solve(&assemble(pointset, kernel, f_data, g_data))
}

impl From<Error> for String {
    fn from(e: Error) -> String {
        e.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::benchmark_problem;
    use crate::geometry::make_level_pointset;
    use crate::stokes_kernel::StokesKernelConfig;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kernel(delta: f64) -> Arc<StokesKernel> {
        Arc::new(StokesKernel::new(StokesKernelConfig::c8(1.0, delta)).unwrap())
    }

    fn level_one(delta: f64) -> (CollocationSystem, LevelSolution) {
        let prob = benchmark_problem();
        let ps = make_level_pointset(1).unwrap();
        let sys = assemble(&ps, kernel(delta), &|x| prob.f(x), &|x| prob.g(x));
        let sol = solve(&sys).unwrap();
        (sys, sol)
    }

    #[test]
    fn level_one_system_shape_and_symmetry() {
        let (sys, sol) = level_one(10.0);
        assert_eq!(sys.matrix.dim(), 82);
        assert_eq!(sys.rhs.len(), 82);
        assert!(sys.matrix.asymmetry() <= 1e-12);
        for (i, f) in sys.functionals.iter().enumerate() {
            assert_eq!(sys.matrix.get(i, i), sys.kernel.gram_entry(f, f));
        }
        assert!(sol.relative_residual <= 1e-8);
        let chol = Cholesky::factor(&sys.matrix).unwrap();
        assert!(chol.diagonal().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn small_support_gives_block_diagonal() {
        // Spacing is 1/4, so only coincident centres interact.
        let prob = benchmark_problem();
        let ps = make_level_pointset(1).unwrap();
        let sys = assemble(&ps, kernel(0.2), &|x| prob.f(x), &|x| prob.g(x));
        let n = sys.matrix.dim();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (&sys.functionals[i], &sys.functionals[j]);
                let v = sys.matrix.get(i, j);
                if a.point != b.point {
                    assert_eq!(v, 0.0);
                } else {
                    assert_eq!(v, sys.kernel.gram_entry(a, b));
                }
            }
        }
    }

    #[test]
    fn solve_reproduces_data() {
        let prob = benchmark_problem();
        let (sys, sol) = level_one(10.0);
        for (f, &rhs) in sys.functionals.iter().zip(&sys.rhs) {
            match f.kind {
                FunctionalKind::Dirichlet(i) => {
                    let (u, _) = sol.evaluate(f.point);
                    assert!((u[i] - prob.g(f.point)[i]).abs() <= 1e-8);
                }
                FunctionalKind::Pde(i) => {
                    let l = sol.evaluate_field(f.point, FieldRequest::LImage);
                    assert!((l[i] - rhs).abs() <= 1e-7 * rhs.abs().max(1.0), "{l:?} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn approximant_is_divergence_free() {
        let (_, sol) = level_one(10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut max_div, mut max_u) = (0.0f64, 0.0f64);
        for _ in 0..2500 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let fields = sol.evaluate_fields(x);
            max_div = max_div.max(fields.divergence.abs());
            max_u = max_u.max(fields.velocity[0].hypot(fields.velocity[1]));
            assert_eq!(sol.evaluate_field(x, FieldRequest::Divergence)[0], fields.divergence);
            assert_eq!(sol.evaluate_field(x, FieldRequest::PressureGradient), fields.grad_p.to_vec());
        }
        assert!(max_div <= 1e-8 * max_u, "{max_div} vs {max_u}");
    }

    #[test]
    fn zero_coefficients_and_far_points() {
        let ps = make_level_pointset(1).unwrap();
        let f = functionals_for(&ps);
        let zero = LevelSolution::new(f.clone(), vec![0.0; f.len()], kernel(10.0), None, 0.0);
        assert_eq!(zero.evaluate([0.3, 0.4]), ([0.0, 0.0], 0.0));
        assert_eq!(zero.evaluate_fields([0.3, 0.4]), ColumnFields::default());
        let ones = LevelSolution::new(f.clone(), vec![1.0; f.len()], kernel(0.5), None, 0.0);
        assert_eq!(ones.evaluate([5.0, 5.0]), ([0.0, 0.0], 0.0));
        assert_ne!(ones.evaluate([0.3, 0.4]).0, [0.0, 0.0]);
    }

    #[test]
    fn permutation_invariance() {
        let prob = benchmark_problem();
        let ps = make_level_pointset(1).unwrap();
        let base = functionals_for(&ps);
        let mut perm: Vec<usize> = (0..base.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
        let shuffled: Vec<_> = perm.iter().map(|&i| base[i]).collect();
        let (f, g) = (|x: Point| prob.f(x), |x: Point| prob.g(x));
        let a = solve(&assemble_functionals(base, kernel(10.0), &f, &g)).unwrap();
        let b = solve(&assemble_functionals(shuffled, kernel(10.0), &f, &g)).unwrap();
        let scale = a.coefficients.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (k, &i) in perm.iter().enumerate() {
            assert!((b.coefficients[k] - a.coefficients[i]).abs() <= 1e-6 * scale);
        }
        for x in [[0.1, 0.2], [0.5, 0.5], [0.93, 0.77]] {
            let (ua, pa) = a.evaluate(x);
            let (ub, pb) = b.evaluate(x);
            assert!((ua[0] - ub[0]).abs() <= 1e-10 && (ua[1] - ub[1]).abs() <= 1e-10);
            assert!((pa - pb).abs() <= 1e-10 * pa.abs().max(1.0));
        }
    }

    #[test]
    fn identity_and_indefinite_systems() {
        let ps = make_level_pointset(1).unwrap();
        let f: Vec<_> = functionals_for(&ps).into_iter().take(3).collect();
        let mut sys = CollocationSystem {
            functionals: f,
            matrix: DenseMatrix::identity(3),
            rhs: vec![1.0, 0.0, 0.0],
            kernel: kernel(1.0),
            pointset: None,
        };
        assert_eq!(solve(&sys).unwrap().coefficients, vec![1.0, 0.0, 0.0]);

        let (mut real, _) = level_one(10.0);
        real.matrix.set(5, 5, -real.matrix.get(5, 5));
        assert!(matches!(solve(&real), Err(Error::NotPositiveDefinite { .. })));
        sys.matrix.set(1, 1, -1.0);
        assert!(matches!(solve(&sys), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
    }
}
