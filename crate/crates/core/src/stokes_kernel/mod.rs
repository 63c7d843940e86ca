//! The scaled matrix-valued Stokes kernel in two dimensions
//!
//! ```text
//! Phi_delta = [ Psi_delta   0     ]    Psi_delta = (-Lap I + grad grad^T) psi_vel,delta
//!             [ 0           phi   ]    phi       = psi_pre,delta
//! ```
//!
//! and the values obtained by applying collocation functionals to it. Each
//! functional is a row of three constant-coefficient operators acting on
//! `(u1, u2, p)`; a Gram entry composes the row of the first functional, the
//! kernel operators and the reflected row of the second functional into one
//! operator per block, which is expanded into radial terms once and then
//! evaluated with table lookups and Horner's rule.

pub mod diffop;
pub mod jet;

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::polykernel::{wendland_c8, WendlandPolynomial};

pub use diffop::{radial_expansion, DiffOp, RadialTerm};
pub use jet::{build_jet, RadialJet, RadialProfile};

/// Derivative order needed on the velocity block (PDE x PDE entries).
pub const VELOCITY_ORDER: usize = 6;
/// Derivative order needed on the pressure block.
pub const PRESSURE_ORDER: usize = 2;

const SLOTS: usize = diffop::MAX_ORDER + 1;

#[derive(Clone, Debug)]
pub struct StokesKernelConfig {
    /// Generates the velocity block (plays `psi_{tau+1}`).
    pub psi_vel: WendlandPolynomial,
    /// Generates the pressure block (plays `psi_{tau-1}`).
    pub psi_pre: WendlandPolynomial,
    /// Viscosity.
    pub nu: f64,
    /// Support radius of the scaled kernel.
    pub delta: f64,
}

impl StokesKernelConfig {
    /// The C^8 Wendland function on both blocks.
    pub fn c8(nu: f64, delta: f64) -> Self {
        let psi = wendland_c8();
        StokesKernelConfig {
            psi_vel: psi.clone(),
            psi_pre: psi,
            nu,
            delta,
        }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        StokesKernelConfig {
            delta,
            ..self.clone()
        }
    }
}

/// Which collocation condition a row of the system expresses. Components are
/// 0-based (`0` for `x1`, `1` for `x2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionalKind {
    /// `(L v)_i = -nu Lap v_i + d_i p` at an interior point.
    Pde(usize),
    /// `v_i` at a boundary point.
    Dirichlet(usize),
}

impl FunctionalKind {
    pub const ALL: [FunctionalKind; 4] = [
        FunctionalKind::Pde(0),
        FunctionalKind::Pde(1),
        FunctionalKind::Dirichlet(0),
        FunctionalKind::Dirichlet(1),
    ];

    pub(crate) fn index(self) -> usize {
        match self {
            FunctionalKind::Pde(i) => i,
            FunctionalKind::Dirichlet(i) => 2 + i,
        }
    }

    pub fn component(self) -> usize {
        match self {
            FunctionalKind::Pde(i) | FunctionalKind::Dirichlet(i) => i,
        }
    }

    pub fn is_pde(self) -> bool {
        matches!(self, FunctionalKind::Pde(_))
    }

    /// The functional as three operators acting on `(u1, u2, p)`.
    fn row(self, nu: f64) -> [DiffOp<f64>; 3] {
        let mut row = [DiffOp::zero(), DiffOp::zero(), DiffOp::zero()];
        match self {
            FunctionalKind::Pde(i) => {
                row[i] = DiffOp::laplacian().scale(-nu);
                row[2] = DiffOp::partial(i);
            }
            FunctionalKind::Dirichlet(i) => row[i] = DiffOp::identity(),
        }
        row
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollocationFunctional {
    pub kind: FunctionalKind,
    pub point: [f64; 2],
}

impl CollocationFunctional {
    pub fn pde(component: usize, point: [f64; 2]) -> Self {
        CollocationFunctional {
            kind: FunctionalKind::Pde(component),
            point,
        }
    }

    pub fn dirichlet(component: usize, point: [f64; 2]) -> Self {
        CollocationFunctional {
            kind: FunctionalKind::Dirichlet(component),
            point,
        }
    }
}

/// Derived quantities of a basis column (or of an approximant).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldRequest {
    /// `(L v)_1, (L v)_2`.
    LImage,
    /// `d1 u1 + d2 u2`.
    Divergence,
    /// `(d1 p, d2 p)`.
    PressureGradient,
}

/// Every value a basis column contributes at one evaluation point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ColumnFields {
    pub velocity: [f64; 2],
    pub pressure: f64,
    pub l_image: [f64; 2],
    pub divergence: f64,
    pub grad_p: [f64; 2],
}

impl ColumnFields {
    pub(crate) fn add_scaled(&mut self, other: &ColumnFields, w: f64) {
        for i in 0..2 {
            self.velocity[i] += w * other.velocity[i];
            self.l_image[i] += w * other.l_image[i];
            self.grad_p[i] += w * other.grad_p[i];
        }
        self.pressure += w * other.pressure;
        self.divergence += w * other.divergence;
    }
}

/// A radial expansion with the scale factors folded into the coefficients.
#[derive(Clone, Debug, Default)]
struct RadialOperator {
    terms: Vec<(u8, u8, u8, f64)>,
    max_s: usize,
}

impl RadialOperator {
    fn compile(op: &DiffOp<f64>, delta: f64) -> Self {
        let mut acc: std::collections::BTreeMap<(u8, u8, u8), f64> = Default::default();
        for ((a1, a2), c) in op.terms() {
            // d^alpha psi_delta(z) = delta^(-2-|alpha|) (d^alpha psi)(z/delta)
            let scale = delta.powi(-2 - (a1 + a2) as i32);
            for t in radial_expansion(a1, a2) {
                *acc.entry((t.m1 as u8, t.m2 as u8, t.s as u8)).or_insert(0.0) +=
                    c * scale * t.coeff as f64;
            }
        }
        let terms: Vec<_> = acc
            .into_iter()
            .filter(|&(_, c)| c != 0.0)
            .map(|((m1, m2, s), c)| (m1, m2, s, c))
            .collect();
        let max_s = terms.iter().map(|t| t.2 as usize).max().unwrap_or(0);
        RadialOperator { terms, max_s }
    }

    #[inline]
    fn eval(&self, profiles: &[f64; SLOTS], sample: &Sample) -> f64 {
        self.terms
            .iter()
            .map(|&(m1, m2, s, c)| {
                c * sample.w1[m1 as usize] * sample.w2[m2 as usize] * profiles[s as usize]
            })
            .sum()
    }
}

#[derive(Clone, Debug, Default)]
struct BlockOp {
    vel: RadialOperator,
    pre: RadialOperator,
}

impl BlockOp {
    /// `row . Phi . col` where `col` acts on the second kernel argument.
    fn compose(row: &[DiffOp<f64>; 3], col: &[DiffOp<f64>; 3], delta: f64) -> Self {
        let kernel = velocity_kernel_ops();
        let mut vel = DiffOp::zero();
        for r in 0..2 {
            for c in 0..2 {
                vel = vel.plus(&row[r].compose(&kernel[r][c]).compose(&col[c]));
            }
        }
        let pre = row[2].compose(&col[2]);
        BlockOp {
            vel: RadialOperator::compile(&vel, delta),
            pre: RadialOperator::compile(&pre, delta),
        }
    }

    #[inline]
    fn eval(&self, sample: &Sample) -> f64 {
        if !sample.inside {
            return 0.0;
        }
        self.vel.eval(&sample.vel, sample) + self.pre.eval(&sample.pre, sample)
    }
}

/// `Psi = (-Lap I + grad grad^T)` in two dimensions.
fn velocity_kernel_ops() -> [[DiffOp<f64>; 2]; 2] {
    let d11 = DiffOp::monomial(2, 0, 1.0);
    let d22 = DiffOp::monomial(0, 2, 1.0);
    let d12 = DiffOp::monomial(1, 1, 1.0);
    [[d22.scale(-1.0), d12.clone()], [d12, d11.scale(-1.0)]]
}

/// Profile values and monomial powers for one displacement `z = x - y`.
#[derive(Clone, Debug)]
pub(crate) struct Sample {
    inside: bool,
    w1: [f64; SLOTS],
    w2: [f64; SLOTS],
    vel: [f64; SLOTS],
    pre: [f64; SLOTS],
}

#[derive(Clone, Debug)]
struct ColumnOps {
    value: [BlockOp; 3],
    l_image: [BlockOp; 2],
    divergence: BlockOp,
    grad_p: [BlockOp; 2],
}

/// A compiled kernel for one configuration. Immutable and `Sync`.
#[derive(Clone, Debug)]
pub struct StokesKernel {
    config: StokesKernelConfig,
    vel_jet: RadialJet,
    pre_jet: RadialJet,
    vel_s: usize,
    pre_s: usize,
    gram: Vec<BlockOp>,
    columns: Vec<ColumnOps>,
    kernel_entries: [[RadialOperator; 2]; 2],
}

impl StokesKernel {
    pub fn new(config: StokesKernelConfig) -> Result<Self> {
        if !(config.delta > 0.0 && config.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel scale must be positive, got {}",
                config.delta
            )));
        }
        if !(config.nu > 0.0 && config.nu.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "viscosity must be positive, got {}",
                config.nu
            )));
        }
        let vel_jet = build_jet(&config.psi_vel, VELOCITY_ORDER)?;
        let pre_jet = build_jet(&config.psi_pre, PRESSURE_ORDER)?;
        let (nu, delta) = (config.nu, config.delta);

        let rows: Vec<[DiffOp<f64>; 3]> = FunctionalKind::ALL.iter().map(|k| k.row(nu)).collect();
        let cols: Vec<[DiffOp<f64>; 3]> = rows
            .iter()
            .map(|row| [row[0].reflect(), row[1].reflect(), row[2].reflect()])
            .collect();

        let mut gram = Vec::with_capacity(16);
        for row in &rows {
            for col in &cols {
                gram.push(BlockOp::compose(row, col, delta));
            }
        }

        let unit = |i: usize| {
            let mut row = [DiffOp::zero(), DiffOp::zero(), DiffOp::zero()];
            row[i] = DiffOp::identity();
            row
        };
        let div_row = [DiffOp::partial(0), DiffOp::partial(1), DiffOp::zero()];
        let grad_row = |i: usize| [DiffOp::zero(), DiffOp::zero(), DiffOp::partial(i)];
        let columns = cols
            .iter()
            .map(|col| ColumnOps {
                value: [0, 1, 2].map(|i| BlockOp::compose(&unit(i), col, delta)),
                l_image: [0, 1].map(|i| BlockOp::compose(&rows[i], col, delta)),
                divergence: BlockOp::compose(&div_row, col, delta),
                grad_p: [0, 1].map(|i| BlockOp::compose(&grad_row(i), col, delta)),
            })
            .collect::<Vec<_>>();

        let kops = velocity_kernel_ops();
        let kernel_entries = [0, 1].map(|i| [0, 1].map(|j| RadialOperator::compile(&kops[i][j], delta)));

        let all_ops = gram.iter().chain(columns.iter().flat_map(|c| {
            c.value
                .iter()
                .chain(c.l_image.iter())
                .chain(std::iter::once(&c.divergence))
                .chain(c.grad_p.iter())
        }));
        let (mut vel_s, mut pre_s) = (0, 0);
        for op in all_ops {
            vel_s = vel_s.max(op.vel.max_s);
            pre_s = pre_s.max(op.pre.max_s);
        }

        Ok(StokesKernel {
            config,
            vel_jet,
            pre_jet,
            vel_s,
            pre_s,
            gram,
            columns,
            kernel_entries,
        })
    }

    pub fn config(&self) -> &StokesKernelConfig {
        &self.config
    }

    pub fn delta(&self) -> f64 {
        self.config.delta
    }

    pub fn nu(&self) -> f64 {
        self.config.nu
    }

    pub fn velocity_jet(&self) -> &RadialJet {
        &self.vel_jet
    }

    pub fn pressure_jet(&self) -> &RadialJet {
        &self.pre_jet
    }

    pub(crate) fn sample(&self, z: [f64; 2]) -> Sample {
        let delta = self.config.delta;
        let w = [z[0] / delta, z[1] / delta];
        let r = w[0].hypot(w[1]);
        let mut s = Sample {
            inside: r < 1.0,
            w1: [0.0; SLOTS],
            w2: [0.0; SLOTS],
            vel: [0.0; SLOTS],
            pre: [0.0; SLOTS],
        };
        if !s.inside {
            return s;
        }
        s.w1[0] = 1.0;
        s.w2[0] = 1.0;
        for i in 1..SLOTS {
            s.w1[i] = s.w1[i - 1] * w[0];
            s.w2[i] = s.w2[i - 1] * w[1];
        }
        self.vel_jet.fill_values(r, self.vel_s, &mut s.vel);
        self.pre_jet.fill_values(r, self.pre_s, &mut s.pre);
        s
    }

    /// `Psi_delta[i][j](diff)`, components 0-based.
    pub fn velocity_kernel_entry(&self, i: usize, j: usize, diff: [f64; 2]) -> f64 {
        let s = self.sample(diff);
        if !s.inside {
            return 0.0;
        }
        self.kernel_entries[i][j].eval(&s.vel, &s)
    }

    /// The first functional applied in the first kernel argument, the second
    /// in the second argument.
    pub fn gram_entry(&self, a: &CollocationFunctional, b: &CollocationFunctional) -> f64 {
        let s = self.sample(sub(a.point, b.point));
        self.gram_from_sample(a.kind, b.kind, &s)
    }

    #[inline]
    pub(crate) fn gram_from_sample(&self, a: FunctionalKind, b: FunctionalKind, s: &Sample) -> f64 {
        self.gram[4 * a.index() + b.index()].eval(s)
    }

    /// `(u1, u2, p)` at `x` of the basis function generated by `src`.
    pub fn eval_basis_column(&self, src: &CollocationFunctional, x: [f64; 2]) -> [f64; 3] {
        let s = self.sample(sub(x, src.point));
        let ops = &self.columns[src.kind.index()];
        [ops.value[0].eval(&s), ops.value[1].eval(&s), ops.value[2].eval(&s)]
    }

    /// Analytic derivatives of the basis function generated by `src`. The
    /// returned vector has two entries for [`FieldRequest::LImage`] and
    /// [`FieldRequest::PressureGradient`], one for
    /// [`FieldRequest::Divergence`].
    pub fn eval_basis_column_derivatives(
        &self,
        src: &CollocationFunctional,
        x: [f64; 2],
        request: FieldRequest,
    ) -> Vec<f64> {
        let s = self.sample(sub(x, src.point));
        let ops = &self.columns[src.kind.index()];
        match request {
            FieldRequest::LImage => vec![ops.l_image[0].eval(&s), ops.l_image[1].eval(&s)],
            FieldRequest::Divergence => vec![ops.divergence.eval(&s)],
            FieldRequest::PressureGradient => {
                vec![ops.grad_p[0].eval(&s), ops.grad_p[1].eval(&s)]
            }
        }
    }

    /// All column quantities at once, sharing one profile evaluation.
    pub fn column_fields(&self, src: &CollocationFunctional, x: [f64; 2]) -> ColumnFields {
        let s = self.sample(sub(x, src.point));
        self.column_fields_from_sample(src.kind, &s)
    }

    pub(crate) fn column_fields_from_sample(&self, kind: FunctionalKind, s: &Sample) -> ColumnFields {
        if !s.inside {
            return ColumnFields::default();
        }
        let ops = &self.columns[kind.index()];
        ColumnFields {
            velocity: [ops.value[0].eval(s), ops.value[1].eval(s)],
            pressure: ops.value[2].eval(s),
            l_image: [ops.l_image[0].eval(s), ops.l_image[1].eval(s)],
            divergence: ops.divergence.eval(s),
            grad_p: [ops.grad_p[0].eval(s), ops.grad_p[1].eval(s)],
        }
    }

    /// Velocity, pressure gradient and L-image only (no divergence), the
    /// quantities the residual updates and error norms need.
    pub(crate) fn column_fields_partial(
        &self,
        kind: FunctionalKind,
        s: &Sample,
        want_l_image: bool,
        want_grad: bool,
        want_div: bool,
    ) -> ColumnFields {
        let mut out = ColumnFields::default();
        if !s.inside {
            return out;
        }
        let ops = &self.columns[kind.index()];
        out.velocity = [ops.value[0].eval(s), ops.value[1].eval(s)];
        if want_l_image {
            out.l_image = [ops.l_image[0].eval(s), ops.l_image[1].eval(s)];
        }
        if want_grad {
            out.grad_p = [ops.grad_p[0].eval(s), ops.grad_p[1].eval(s)];
        }
        if want_div {
            out.divergence = ops.divergence.eval(s);
        }
        out
    }
}

#[inline]
pub(crate) fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// `(op psi)(0)` in exact arithmetic for the unscaled radial function.
pub fn origin_derivative_exact(psi: &WendlandPolynomial, op: &DiffOp<i64>) -> Result<BigRational> {
    let jet = build_jet(psi, op.order())?;
    jet.origin_value_exact(op)
}

/// Integer operators used by the coincident-point checks.
pub mod ops {
    use super::DiffOp;

    pub fn d(a1: u32, a2: u32) -> DiffOp<i64> {
        DiffOp::monomial(a1, a2, 1)
    }

    pub fn bilaplacian() -> DiffOp<i64> {
        let lap = DiffOp::<i64>::laplacian();
        lap.compose(&lap)
    }
}
