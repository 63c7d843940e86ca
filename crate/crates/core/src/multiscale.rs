//! Multilevel residual correction with a geometric scale schedule.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::collocation::{assemble, solve, LevelSolution, VectorField};
use crate::error::{Error, Result};
use crate::geometry::{make_level_pointset, nominal_spacing, LevelPointSet, Point};
use crate::stokes_kernel::{StokesKernel, StokesKernelConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct MultiscaleConfig {
    pub n_levels: usize,
    pub beta: f64,
    /// Bound on the spacing ratio between consecutive levels.
    pub mu: f64,
    pub tau: f64,
    pub nu: f64,
    /// Explicit per-level scales replacing the schedule.
    pub delta_override: Option<Vec<f64>>,
}

impl Default for MultiscaleConfig {
    fn default() -> Self {
        MultiscaleConfig {
            n_levels: 5,
            beta: 18.779,
            mu: 0.5,
            tau: 4.5,
            nu: 1.0,
            delta_override: None,
        }
    }
}

impl MultiscaleConfig {
    pub fn with_levels(mut self, n: usize) -> Self {
        self.n_levels = n;
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_levels == 0 {
            return bad("at least one level is required".into());
        }
        if !(self.beta > 0.0) || !(self.nu > 0.0) {
            return bad(format!("beta and nu must be positive (beta = {}, nu = {})", self.beta, self.nu));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return bad(format!("mu must lie in (0, 1), got {}", self.mu));
        }
        // The level grids halve their spacing.
        if self.mu < 0.5 {
            return bad(format!("level spacings shrink by 1/2, which exceeds mu = {}", self.mu));
        }
        if !(self.tau > 2.0) {
            return bad(format!("tau must exceed 2, got {}", self.tau));
        }
        if let Some(d) = &self.delta_override {
            if d.len() < self.n_levels {
                return bad(format!("{} scales given for {} levels", d.len(), self.n_levels));
            }
            if d.iter().any(|&v| !(v > 0.0)) {
                return bad("scales must be positive".into());
            }
        }
        Ok(())
    }
}

/// `delta_j = beta * h_j^((tau - 2) / (tau + 1))` for `j = 1..=levels`.
pub fn scale_schedule(config: &MultiscaleConfig, levels: usize) -> Result<Vec<f64>> {
    if let Some(d) = &config.delta_override {
        if d.len() < levels {
            return Err(Error::InvalidArgument(format!("{} scales given for {levels} levels", d.len())));
        }
        return Ok(d[..levels].to_vec());
    }
    if !(config.tau > 2.0) {
        return Err(Error::InvalidArgument(format!("tau must exceed 2, got {}", config.tau)));
    }
    let exponent = (config.tau - 2.0) / (config.tau + 1.0);
    Ok((1..=levels)
        .map(|j| config.beta * nominal_spacing(j).powf(exponent))
        .collect())
}

/// Field of a solution evaluated pointwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelField {
    Velocity,
    Pressure,
    PressureGradient,
    Divergence,
    /// `-nu laplacian(u) + grad(p)`.
    LImage,
}

#[derive(Clone, Debug)]
pub struct MultiscaleModel {
    pub levels: Vec<LevelSolution>,
    pub config: MultiscaleConfig,
}

impl MultiscaleModel {
    pub fn empty(config: MultiscaleConfig) -> Self {
        MultiscaleModel {
            levels: Vec::new(),
            config,
        }
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.delta()).collect()
    }

    /// The model truncated to its first `n` levels.
    pub fn prefix(&self, n: usize) -> MultiscaleModel {
        MultiscaleModel {
            levels: self.levels[..n.min(self.levels.len())].to_vec(),
            config: self.config.clone(),
        }
    }

    pub fn evaluate(&self, x: Point, field: ModelField) -> Vec<f64> {
        evaluate_levels(&self.levels, x, field)
    }
}

pub fn evaluate_model(model: &MultiscaleModel, x: Point, field: ModelField) -> Vec<f64> {
    model.evaluate(x, field)
}

fn evaluate_levels(levels: &[LevelSolution], x: Point, field: ModelField) -> Vec<f64> {
    let mut out = match field {
        ModelField::Velocity | ModelField::PressureGradient | ModelField::LImage => vec![0.0; 2],
        ModelField::Pressure | ModelField::Divergence => vec![0.0],
    };
    for level in levels {
        let f = match field {
            ModelField::Velocity | ModelField::Pressure => level.accumulate(x, false, false, false),
            ModelField::PressureGradient => level.accumulate(x, false, true, false),
            ModelField::Divergence => level.accumulate(x, false, false, true),
            ModelField::LImage => level.accumulate(x, true, false, false),
        };
        let v: &[f64] = match field {
            ModelField::Velocity => &f.velocity,
            ModelField::Pressure => std::slice::from_ref(&f.pressure),
            ModelField::PressureGradient => &f.grad_p,
            ModelField::Divergence => std::slice::from_ref(&f.divergence),
            ModelField::LImage => &f.l_image,
        };
        for (o, v) in out.iter_mut().zip(v) {
            *o += v;
        }
    }
    out
}

/// Data left to fit after the levels solved so far: the original closed
/// form minus the accumulated approximation, evaluated on demand.
pub struct Residual<'a> {
    original: &'a dyn VectorField,
    levels: &'a [LevelSolution],
    field: ModelField,
}

impl<'a> Residual<'a> {
    /// `f - L M v`.
    pub fn interior(f: &'a dyn VectorField, levels: &'a [LevelSolution]) -> Self {
        Residual {
            original: f,
            levels,
            field: ModelField::LImage,
        }
    }

    /// `g - M u`.
    pub fn boundary(g: &'a dyn VectorField, levels: &'a [LevelSolution]) -> Self {
        Residual {
            original: g,
            levels,
            field: ModelField::Velocity,
        }
    }
}

impl VectorField for Residual<'_> {
    fn eval(&self, x: Point) -> [f64; 2] {
        let base = self.original.eval(x);
        let acc = evaluate_levels(self.levels, x, self.field);
        [base[0] - acc[0], base[1] - acc[1]]
    }
}

/// Run the multilevel loop: level `j` is fitted to the residual of levels
/// `1..j` at its own collocation points.
pub fn run(f: &dyn VectorField, g: &dyn VectorField, config: &MultiscaleConfig) -> Result<MultiscaleModel> {
    run_with_progress(f, g, config, |_| {})
}

pub fn run_with_progress(
    f: &dyn VectorField,
    g: &dyn VectorField,
    config: &MultiscaleConfig,
    mut progress: impl FnMut(&LevelSolution),
) -> Result<MultiscaleModel> {
    config.validate()?;
    let deltas = scale_schedule(config, config.n_levels)?;
    let mut levels: Vec<LevelSolution> = Vec::with_capacity(config.n_levels);
    for (j, &delta) in (1..=config.n_levels).zip(&deltas) {
        let step = || -> Result<LevelSolution> {
            let pointset = make_level_pointset(j)?;
            let kernel = Arc::new(StokesKernel::new(StokesKernelConfig::c8(config.nu, delta))?);
            let fj = Residual::interior(f, &levels);
            let gj = Residual::boundary(g, &levels);
            let system = assemble(&pointset, kernel, &fj, &gj);
            solve(&system)
        };
        let level = step().map_err(|e| e.at_level(j))?;
        progress(&level);
        levels.push(level);
    }
    Ok(MultiscaleModel {
        levels,
        config: config.clone(),
    })
}

const MAGIC: &[u8; 8] = b"MSSTOKES";
const VERSION: u32 = 1;

/// Binary layout, all integers `u64` and reals `f64`, little-endian:
///
/// ```text
/// magic "MSSTOKES" | version u32 | n_levels
/// beta mu tau nu
/// per level:
///   level delta nominal_h measured_h separation_q relative_residual
///   n_interior n_boundary n_coefficients
///   interior points (x, y)... boundary points (x, y)... coefficients...
/// ```
///
/// The kernel is always the C8 Wendland pair.
pub fn write_model(model: &MultiscaleModel, out: &mut impl Write) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    let c = &model.config;
    put_u64(out, model.levels.len() as u64)?;
    for v in [c.beta, c.mu, c.tau, c.nu] {
        put_f64(out, v)?;
    }
    for level in &model.levels {
        let ps = level
            .pointset
            .as_ref()
            .ok_or_else(|| Error::Format("level has no point set".into()))?;
        put_u64(out, ps.level as u64)?;
        for v in [level.delta(), ps.nominal_h, ps.measured_h, ps.separation_q, level.relative_residual] {
            put_f64(out, v)?;
        }
        for n in [ps.interior.len(), ps.boundary.len(), level.coefficients.len()] {
            put_u64(out, n as u64)?;
        }
        for p in ps.interior.iter().chain(&ps.boundary) {
            put_f64(out, p[0])?;
            put_f64(out, p[1])?;
        }
        for &v in &level.coefficients {
            put_f64(out, v)?;
        }
    }
    Ok(())
}

pub fn read_model(input: &mut impl Read) -> Result<MultiscaleModel> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a model file".into()));
    }
    let mut ver = [0u8; 4];
    input.read_exact(&mut ver)?;
    if u32::from_le_bytes(ver) != VERSION {
        return Err(Error::Format(format!("unsupported model version {}", u32::from_le_bytes(ver))));
    }
    let n_levels = get_u64(input)? as usize;
    let (beta, mu, tau, nu) = (get_f64(input)?, get_f64(input)?, get_f64(input)?, get_f64(input)?);
    let mut levels = Vec::with_capacity(n_levels.min(64));
    let mut deltas = Vec::new();
    for _ in 0..n_levels {
        let level = get_u64(input)? as usize;
        let delta = get_f64(input)?;
        let nominal_h = get_f64(input)?;
        let measured_h = get_f64(input)?;
        let separation_q = get_f64(input)?;
        let residual = get_f64(input)?;
        let n_int = get_u64(input)? as usize;
        let n_bnd = get_u64(input)? as usize;
        let n_coef = get_u64(input)? as usize;
        if n_coef != 2 * (n_int + n_bnd) {
            return Err(Error::Format(format!(
                "{n_coef} coefficients for {} centres",
                n_int + n_bnd
            )));
        }
        let mut points = |n: usize| -> Result<Vec<Point>> {
            (0..n).map(|_| Ok([get_f64(input)?, get_f64(input)?])).collect()
        };
        let interior = points(n_int)?;
        let boundary = points(n_bnd)?;
        let coefficients = (0..n_coef).map(|_| get_f64(input)).collect::<Result<Vec<_>>>()?;
        let pointset = LevelPointSet {
            level,
            interior,
            boundary,
            nominal_h,
            measured_h,
            separation_q,
        };
        let kernel = Arc::new(StokesKernel::new(StokesKernelConfig::c8(nu, delta))?);
        let functionals = crate::collocation::functionals_for(&pointset);
        levels.push(LevelSolution::new(functionals, coefficients, kernel, Some(pointset), residual));
        deltas.push(delta);
    }
    Ok(MultiscaleModel {
        levels,
        config: MultiscaleConfig {
            n_levels,
            beta,
            mu,
            tau,
            nu,
            delta_override: Some(deltas),
        },
    })
}

fn put_u64(out: &mut impl Write, v: u64) -> Result<()> {
    Ok(out.write_all(&v.to_le_bytes())?)
}

fn put_f64(out: &mut impl Write, v: f64) -> Result<()> {
    Ok(out.write_all(&v.to_le_bytes())?)
}

fn get_u64(input: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(input: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
