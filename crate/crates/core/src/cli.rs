//! Experiment configuration and the command implementations behind the
//! `multiscale-stokes` binary.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use num_traits::{Signed, Zero};

use crate::analysis::{
    condition_number, error_norms, benchmark_problem, sci4, slope_check, ErrorReport, Norms,
};
use crate::collocation::assemble;
use crate::error::{Error, Result};
use crate::geometry::{make_level_pointset, Point};
use crate::linalg::DenseMatrix;
use crate::multiscale::{run_with_progress, scale_schedule, ModelField, MultiscaleConfig};
use crate::polykernel::{wendland_c8, wendland_from_integral, WendlandPolynomial};
use crate::stokes_kernel::{origin_derivative_exact, ops, StokesKernel, StokesKernelConfig};

/// Largest number of levels a run accepts; level 8 already has over half a
/// million unknowns.
pub const MAX_LEVELS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub levels: usize,
    pub beta: f64,
    pub mu: f64,
    pub nu: f64,
    pub tau: f64,
    pub quad_points: usize,
    pub eigen_levels: usize,
    pub output: PathBuf,
    pub summary: PathBuf,
    pub model: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            levels: 5,
            beta: 18.779,
            mu: 0.5,
            nu: 1.0,
            tau: 4.5,
            quad_points: 100,
            eigen_levels: 3,
            output: PathBuf::from("report.csv"),
            summary: PathBuf::from("summary.txt"),
            model: None,
        }
    }
}

pub const KEYS: [&str; 10] = [
    "levels",
    "beta",
    "mu",
    "nu",
    "tau",
    "quad_points",
    "eigen_levels",
    "output",
    "summary",
    "model",
];

impl RunConfig {
    /// Parse `key = value` lines on top of the defaults. `#` starts a
    /// comment; blank lines are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                message: format!("expected key = value, got `{line}`"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|message| Error::Config {
                line: i + 1,
                message,
            })?;
        }
        Ok(())
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("bad value `{v}` for {key}"))
        }
        match key.replace('-', "_").as_str() {
            "levels" => self.levels = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "mu" => self.mu = num(key, value)?,
            "nu" => self.nu = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "quad_points" => self.quad_points = num(key, value)?,
            "eigen_levels" => self.eigen_levels = num(key, value)?,
            "output" => self.output = PathBuf::from(value),
            "summary" => self.summary = PathBuf::from(value),
            "model" => self.model = Some(PathBuf::from(value)),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.levels == 0 || self.levels > MAX_LEVELS {
            return bad(&format!("levels must be between 1 and {MAX_LEVELS}"));
        }
        if !(self.beta > 0.0 && self.mu > 0.0 && self.nu > 0.0 && self.tau > 0.0) {
            return bad("beta, mu, nu and tau must be positive");
        }
        if self.quad_points < 2 {
            return bad("quad_points must be at least 2");
        }
        Ok(())
    }

    pub fn multiscale(&self) -> MultiscaleConfig {
        MultiscaleConfig {
            n_levels: self.levels,
            beta: self.beta,
            mu: self.mu,
            tau: self.tau,
            nu: self.nu,
            delta_override: None,
        }
    }

    /// Whether the published reference values apply to this run.
    pub fn is_reference_setup(&self) -> bool {
        let d = RunConfig::default();
        self.beta == d.beta && self.mu == d.mu && self.nu == d.nu && self.tau == d.tau
    }
}

/// Published errors of the benchmark, levels 1 to 5.
pub struct Reference {
    pub delta: [f64; 5],
    pub velocity_l2: [f64; 5],
    pub velocity_linf: [f64; 5],
    pub grad_p_l2: [f64; 5],
    pub grad_p_linf: [f64; 5],
}

pub const REFERENCE: Reference = Reference {
    delta: [10.0, 7.29, 5.33, 3.89, 2.84],
    velocity_l2: [1.592e-02, 6.498e-04, 3.274e-05, 1.650e-06, 1.028e-07],
    velocity_linf: [2.740e-02, 2.233e-03, 1.462e-04, 8.268e-06, 4.579e-07],
    grad_p_l2: [1.112e+00, 1.222e-01, 1.235e-02, 2.561e-03, 5.612e-04],
    grad_p_linf: [4.209e+00, 3.338e-01, 1.048e-01, 3.650e-02, 1.211e-02],
};

/// Results of [`run_experiment`].
pub struct RunOutcome {
    pub report: ErrorReport,
    pub csv: String,
    pub summary: String,
    pub model: crate::multiscale::MultiscaleModel,
}

/// Solve the benchmark with `cfg`, measure errors after every level and
/// condition numbers for the first `eigen_levels` levels.
pub fn run_experiment(cfg: &RunConfig, mut progress: impl FnMut(&str)) -> Result<RunOutcome> {
    cfg.validate()?;
    let prob = benchmark_problem().with_nu(cfg.nu);
    let f = |x: Point| prob.f(x);
    let g = |x: Point| prob.g(x);
    let ms = cfg.multiscale();
    let model = run_with_progress(&f, &g, &ms, |level| {
        progress(&format!(
            "level {} solved: delta = {:.4}, {} unknowns, relative residual {:.3e}",
            level.pointset.as_ref().map_or(0, |p| p.level),
            level.delta(),
            level.coefficients.len(),
            level.relative_residual
        ))
    })?;

    let mut report = ErrorReport {
        deltas: model.deltas(),
        quad_points: cfg.quad_points,
        ..Default::default()
    };
    for j in 1..=cfg.levels {
        let m = model.prefix(j);
        let diff = |field: ModelField, exact: fn(Point) -> [f64; 2]| {
            let m = &m;
            move |x: Point| {
                let a = m.evaluate(x, field);
                let e = exact(x);
                vec![a[0] - e[0], a[1] - e[1]]
            }
        };
        report.velocity.push(error_norms(diff(ModelField::Velocity, prob.u), cfg.quad_points)?);
        report
            .pressure_gradient
            .push(error_norms(diff(ModelField::PressureGradient, prob.grad_p), cfg.quad_points)?);
        progress(&format!("level {j} errors measured"));
    }

    let eig = cfg.eigen_levels.min(cfg.levels);
    for j in 1..=cfg.levels {
        report.condition_numbers.push(if j <= eig {
            let k = condition_number(&system_matrix(j, report.deltas[j - 1], cfg.nu)?)
                .map_err(|e| e.at_level(j))?;
            progress(&format!("level {j} condition number {k:.3e}"));
            Some(k)
        } else {
            None
        });
    }

    let csv = report.to_csv();
    let summary = summarize(cfg, &report);
    Ok(RunOutcome {
        report,
        csv,
        summary,
        model,
    })
}

/// The collocation matrix of level `level` for scale `delta`.
pub fn system_matrix(level: usize, delta: f64, nu: f64) -> Result<DenseMatrix> {
    let ps = make_level_pointset(level)?;
    let kernel = Arc::new(StokesKernel::new(StokesKernelConfig::c8(nu, delta))?);
    let zero = |_: Point| [0.0, 0.0];
    Ok(assemble(&ps, kernel, &zero, &zero).matrix)
}

fn summarize(cfg: &RunConfig, report: &ErrorReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "benchmark Stokes flow, {} levels, beta = {}, tau = {}, nu = {}, {}x{} Gauss-Legendre points",
        report.levels(),
        cfg.beta,
        cfg.tau,
        cfg.nu,
        report.quad_points,
        report.quad_points
    );
    let _ = writeln!(
        s,
        "velocity uses u2 = 5 sin(5x) sin(2y), the field consistent with the forcing"
    );
    let rows: [(&str, Vec<f64>, &[f64; 5]); 5] = [
        ("delta", report.deltas.clone(), &REFERENCE.delta),
        ("velocity_l2", report.velocity.iter().map(|n: &Norms| n.l2).collect(), &REFERENCE.velocity_l2),
        ("velocity_linf", report.velocity.iter().map(|n| n.linf).collect(), &REFERENCE.velocity_linf),
        ("grad_p_l2", report.pressure_gradient.iter().map(|n| n.l2).collect(), &REFERENCE.grad_p_l2),
        ("grad_p_linf", report.pressure_gradient.iter().map(|n| n.linf).collect(), &REFERENCE.grad_p_linf),
    ];
    let reference = cfg.is_reference_setup();
    let _ = writeln!(s);
    if reference {
        let _ = writeln!(s, "{:<14} {:>5} {:>10} {:>10} {:>8}", "quantity", "level", "computed", "published", "ratio");
    } else {
        let _ = writeln!(s, "{:<14} {:>5} {:>10}", "quantity", "level", "computed");
    }
    for (name, vals, refs) in &rows {
        for (j, v) in vals.iter().enumerate() {
            if reference && j < refs.len() {
                let _ = writeln!(
                    s,
                    "{:<14} {:>5} {:>10} {:>10} {:>8.3}",
                    name,
                    j + 1,
                    sci4(*v),
                    sci4(refs[j]),
                    v / refs[j]
                );
            } else {
                let _ = writeln!(s, "{:<14} {:>5} {:>10}", name, j + 1, sci4(*v));
            }
        }
    }
    let kappas: Vec<(f64, f64)> = report
        .condition_numbers
        .iter()
        .enumerate()
        .filter_map(|(j, k)| k.map(|k| (crate::geometry::nominal_spacing(j + 1), k)))
        .collect();
    if !kappas.is_empty() {
        let _ = writeln!(s);
        for (j, (_, k)) in kappas.iter().enumerate() {
            let _ = writeln!(s, "kappa level {}: {}", j + 1, sci4(*k));
        }
        if let Ok(fit) = slope_check(&kappas, cfg.tau) {
            let _ = writeln!(
                s,
                "kappa growth exponent {:.3} (theoretical ceiling {})",
                fit.slope, fit.ceiling
            );
        }
    }
    if !reference {
        let _ = writeln!(s, "\nparameters differ from the published setup; no comparison shown");
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub statement: &'static str,
    pub value: String,
    pub status: CheckStatus,
}

/// The kernel the coincident-point checks run on: the closed-form C8
/// function for `k = 4`, the integral form otherwise.
pub fn lemma_kernel(k: u32) -> Result<WendlandPolynomial> {
    if k == 4 {
        Ok(wendland_c8())
    } else {
        wendland_from_integral(2, k)
    }
}

/// Derivative identities at the origin: mixed second derivatives and their
/// bilaplacians vanish; pure ones are negative and direction independent.
pub fn verify_lemmas(k: u32) -> Result<Vec<LemmaCheck>> {
    let psi = lemma_kernel(k)?;
    let lap2 = ops::bilaplacian();
    let mut out = Vec::new();
    let skipped = |name, statement, need: u32| LemmaCheck {
        name,
        statement,
        value: format!("skipped: needs k >= {need}"),
        status: CheckStatus::Skipped,
    };
    let status = |ok: bool| if ok { CheckStatus::Pass } else { CheckStatus::Fail };

    if k >= 2 {
        let v = origin_derivative_exact(&psi, &ops::d(1, 1))?;
        out.push(LemmaCheck {
            name: "mixed second derivative",
            statement: "d12 psi(0) = 0",
            value: v.to_string(),
            status: status(v.is_zero()),
        });
    } else {
        out.push(skipped("mixed second derivative", "d12 psi(0) = 0", 2));
    }
    if k >= 3 {
        let v = origin_derivative_exact(&psi, &ops::d(1, 1).compose(&lap2))?;
        out.push(LemmaCheck {
            name: "mixed bilaplacian",
            statement: "d12 bilap psi(0) = 0",
            value: v.to_string(),
            status: status(v.is_zero()),
        });
    } else {
        out.push(skipped("mixed bilaplacian", "d12 bilap psi(0) = 0", 3));
    }
    if k >= 2 {
        let a = origin_derivative_exact(&psi, &ops::d(2, 0))?;
        let b = origin_derivative_exact(&psi, &ops::d(0, 2))?;
        out.push(LemmaCheck {
            name: "pure second derivative",
            statement: "d11 psi(0) = d22 psi(0) < 0",
            value: a.to_string(),
            status: status(a == b && a.is_negative()),
        });
    } else {
        out.push(skipped("pure second derivative", "d11 psi(0) = d22 psi(0) < 0", 2));
    }
    if k >= 3 {
        let a = origin_derivative_exact(&psi, &ops::d(2, 0).compose(&lap2))?;
        let b = origin_derivative_exact(&psi, &ops::d(0, 2).compose(&lap2))?;
        out.push(LemmaCheck {
            name: "pure bilaplacian",
            statement: "d11 bilap psi(0) = d22 bilap psi(0) < 0",
            value: a.to_string(),
            status: status(a == b && a.is_negative()),
        });
    } else {
        out.push(skipped("pure bilaplacian", "d11 bilap psi(0) = d22 bilap psi(0) < 0", 3));
    }
    Ok(out)
}

pub fn format_lemmas(k: u32, checks: &[LemmaCheck]) -> String {
    let mut s = format!("Wendland kernel d = 2, k = {k}\n");
    for c in checks {
        let tag = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
        };
        let _ = writeln!(s, "{tag}  {:<24} {:<42} {}", c.name, c.statement, c.value);
    }
    s
}

/// Coefficient listing of `psi_{ell,k}` on `R^d` from the integral form,
/// alongside the closed form and the coefficient ratio where one exists.
pub fn kernel_info(d: u32, k: u32) -> Result<String> {
    let integral = wendland_from_integral(d, k)?;
    let closed = (d == 2 && k == 4).then(wendland_c8);
    let mut s = format!(
        "Wendland function d = {d}, k = {k}, ell = {}, C^{} smoothness, degree {}\n",
        integral.ell(),
        2 * k,
        integral.degree().unwrap_or(0)
    );
    let n = integral.coeffs().len();
    let _ = writeln!(s, "{n} coefficients");
    let ints = integral.coefficient_strings();
    for i in 0..n {
        match &closed {
            Some(c) => {
                let ratio = if integral.coeff(i).is_zero() {
                    "-".to_string()
                } else {
                    (c.coeff(i) / integral.coeff(i)).to_string()
                };
                let _ = writeln!(
                    s,
                    "b_{i} = {}    integral form {}    ratio {}",
                    c.coeff(i),
                    ints[i],
                    ratio
                );
            }
            None => {
                let _ = writeln!(s, "b_{i} = {}", ints[i]);
            }
        }
    }
    Ok(s)
}

/// Level point set as CSV rows `x,y,kind`.
pub fn points_csv(level: usize) -> Result<String> {
    let ps = make_level_pointset(level)?;
    let mut s = String::from("x,y,kind\n");
    for p in &ps.interior {
        let _ = writeln!(s, "{},{},interior", p[0], p[1]);
    }
    for p in &ps.boundary {
        let _ = writeln!(s, "{},{},boundary", p[0], p[1]);
    }
    Ok(s)
}

/// The scheduled scale of `level` under `cfg`.
pub fn scheduled_delta(cfg: &RunConfig, level: usize) -> Result<f64> {
    let d = scale_schedule(&cfg.multiscale(), level)?;
    Ok(d[level - 1])
}
