//! End-to-end acceptance checks, one PASS/FAIL line each.
//!
//! Level 5 of the benchmark (8962 unknowns, about 1.3 GB) runs only when
//! `MULTISCALE_STOKES_LEVEL5=1` is set. `MULTISCALE_STOKES_QUAD` overrides
//! the 100 points per dimension used for the error norms.

use std::process::ExitCode;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use multiscale_stokes::analysis::{
    error_norms, extreme_eigenvalues, benchmark_forcing, benchmark_problem, slope_check,
};
use multiscale_stokes::cli::{system_matrix, REFERENCE};
use multiscale_stokes::collocation::{assemble_functionals, functionals_for, solve};
use multiscale_stokes::geometry::{make_level_pointset, nominal_spacing, Point};
use multiscale_stokes::linalg::Cholesky;
use multiscale_stokes::multiscale::{run, scale_schedule, ModelField, MultiscaleConfig, MultiscaleModel};
use multiscale_stokes::polykernel::wendland_c8;
use multiscale_stokes::stokes_kernel::{
    build_jet, origin_derivative_exact, ops, CollocationFunctional, FieldRequest, FunctionalKind,
    StokesKernel, StokesKernelConfig,
};

struct Outcome {
    failures: usize,
}

impl Outcome {
    fn report(&mut self, id: &str, ok: bool, detail: String) {
        println!("{} criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures += 1;
        }
    }
}

fn env_flag(name: &str) -> bool {
    std::env::var(name).is_ok_and(|v| v == "1")
}

fn main() -> ExitCode {
    let level5 = env_flag("MULTISCALE_STOKES_LEVEL5");
    let quad: usize = std::env::var("MULTISCALE_STOKES_QUAD")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(100);
    let levels = if level5 { 5 } else { 4 };

    let mut out = Outcome { failures: 0 };
    let prob = benchmark_problem();
    let f = |x: Point| prob.f(x);
    let g = |x: Point| prob.g(x);
    let start = std::time::Instant::now();
    let model = run(&f, &g, &MultiscaleConfig::default().with_levels(levels));
    let elapsed = start.elapsed();

    table_reproduction(&mut out, model.as_ref().ok(), levels, quad, elapsed);
    schedule(&mut out);
    lemmas(&mut out);
    divergence(&mut out, model.as_ref().ok());
    definiteness(&mut out, &model);
    conditioning(&mut out);
    properties(&mut out);
    manufactured(&mut out);

    if out.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", out.failures);
        ExitCode::FAILURE
    }
}

fn table_reproduction(
    out: &mut Outcome,
    model: Option<&MultiscaleModel>,
    levels: usize,
    quad: usize,
    elapsed: std::time::Duration,
) {
    let Some(model) = model else {
        out.report("1", false, "multilevel run failed".into());
        return;
    };
    let prob = benchmark_problem();
    let mut ok = true;
    let mut parts = Vec::new();
    for j in 1..=levels {
        let m = model.prefix(j);
        let vel = error_norms(
            |x| {
                let a = m.evaluate(x, ModelField::Velocity);
                let e = (prob.u)(x);
                vec![a[0] - e[0], a[1] - e[1]]
            },
            quad,
        )
        .unwrap();
        let gp = error_norms(
            |x| {
                let a = m.evaluate(x, ModelField::PressureGradient);
                let e = (prob.grad_p)(x);
                vec![a[0] - e[0], a[1] - e[1]]
            },
            quad,
        )
        .unwrap();
        let i = j - 1;
        let ratios = [
            (vel.l2 / REFERENCE.velocity_l2[i], 2.0),
            (vel.linf / REFERENCE.velocity_linf[i], 3.0),
            (gp.l2 / REFERENCE.grad_p_l2[i], 3.0),
            (gp.linf / REFERENCE.grad_p_linf[i], 3.0),
        ];
        for (r, factor) in ratios {
            ok &= r <= factor && r >= 1.0 / factor;
        }
        parts.push(format!(
            "L{j} u_L2 {:.3e} (x{:.2}) u_Linf x{:.2} gradp_L2 x{:.2} gradp_Linf x{:.2}",
            vel.l2, ratios[0].0, ratios[1].0, ratios[2].0, ratios[3].0
        ));
    }
    out.report(
        "1",
        ok,
        format!(
            "benchmark errors, levels 1-{levels}, {quad}^2 Gauss-Legendre, solve {:.1}s: {}",
            elapsed.as_secs_f64(),
            parts.join("; ")
        ),
    );
}

fn schedule(out: &mut Outcome) {
    let d = scale_schedule(&MultiscaleConfig::default(), 5).unwrap();
    let ok = d
        .iter()
        .zip(REFERENCE.delta)
        .all(|(a, b)| (a - b).abs() <= 0.01);
    let shown: Vec<String> = d.iter().map(|v| format!("{v:.4}")).collect();
    out.report("2", ok, format!("scale schedule [{}]", shown.join(", ")));
}

fn lemmas(out: &mut Outcome) {
    let psi = wendland_c8();
    let lap2 = ops::bilaplacian();
    let d12 = origin_derivative_exact(&psi, &ops::d(1, 1)).unwrap();
    let d12b = origin_derivative_exact(&psi, &ops::d(1, 1).compose(&lap2)).unwrap();
    let d11 = origin_derivative_exact(&psi, &ops::d(2, 0)).unwrap();
    let d11b = origin_derivative_exact(&psi, &ops::d(2, 0).compose(&lap2)).unwrap();

    // Floating point path straight from the radial expansion.
    let jet = build_jet(&psi, 6).unwrap();
    let z = [0.0, 0.0];
    let f12 = jet.partial(1, 1, z);
    let f12b = jet.partial(5, 1, z) + 2.0 * jet.partial(3, 3, z) + jet.partial(1, 5, z);

    let ok = d12.is_zero()
        && d12b.is_zero()
        && d11 == BigRational::from_integer((-130).into())
        && d11b == BigRational::from_integer((-2_471_040).into())
        && f12.abs() <= 1e-12
        && f12b.abs() <= 1e-12;
    out.report(
        "3",
        ok,
        format!("exact d12 = {d12}, d12 bilap = {d12b}, d11 = {d11}, d11 bilap = {d11b}; float d12 = {f12:e}, d12 bilap = {f12b:e}"),
    );
}

fn divergence(out: &mut Outcome, model: Option<&MultiscaleModel>) {
    let Some(model) = model else {
        out.report("4", false, "multilevel run failed".into());
        return;
    };
    let grid: Vec<Point> = (0..50)
        .flat_map(|j| (0..50).map(move |i| [i as f64 / 49.0, j as f64 / 49.0]))
        .collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 1..=model.levels.len().min(4) {
        let m = model.prefix(n);
        let (mut div, mut size) = (0.0f64, 0.0f64);
        for &x in &grid {
            div = div.max(m.evaluate(x, ModelField::Divergence)[0].abs());
            let u = m.evaluate(x, ModelField::Velocity);
            size = size.max(u[0].hypot(u[1]));
        }
        ok &= div <= 1e-8 * size;
        parts.push(format!("n={n}: {:.2e}", div / size));
    }
    out.report("4", ok, format!("max |div M_n u| / max |M_n u| on 50x50 grid: {}", parts.join(", ")));
}

fn definiteness(out: &mut Outcome, model: &multiscale_stokes::Result<MultiscaleModel>) {
    let deltas = scale_schedule(&MultiscaleConfig::default(), 4).unwrap();
    let mut ok = model.is_ok();
    let mut parts = Vec::new();
    for j in 1..=4 {
        let a = system_matrix(j, deltas[j - 1], 1.0).unwrap();
        match Cholesky::factor(&a) {
            Ok(c) => {
                let min_pivot = c.diagonal().into_iter().fold(f64::INFINITY, f64::min);
                ok &= min_pivot > 0.0;
                parts.push(format!("L{j} factor ok (n={}, min pivot {min_pivot:.2e})", a.dim()));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("L{j} {e}"));
            }
        }
        if j <= 3 {
            match extreme_eigenvalues(&a, 3000) {
                Ok((lo, _)) => parts.push(format!("lambda_min {lo:.3e}")),
                Err(e) => {
                    ok = false;
                    parts.push(format!("eigen {e}"));
                }
            }
        }
    }
    out.report("5", ok, format!("SPD at levels 1-4: {}", parts.join(", ")));
}

fn conditioning(out: &mut Outcome) {
    let deltas = scale_schedule(&MultiscaleConfig::default(), 3).unwrap();
    let mut pts = Vec::new();
    for j in 1..=3 {
        let a = system_matrix(j, deltas[j - 1], 1.0).unwrap();
        let (lo, hi) = extreme_eigenvalues(&a, 3000).unwrap();
        pts.push((nominal_spacing(j), hi / lo));
    }
    let fit = slope_check(&pts, 4.5).unwrap();
    let increasing = pts.windows(2).all(|w| w[1].1 > w[0].1);
    let ok = fit.slope > 0.0 && fit.slope <= 10.0 && increasing;
    let k: Vec<String> = pts.iter().map(|p| format!("{:.3e}", p.1)).collect();
    out.report(
        "6",
        ok,
        format!("kappa [{}], fitted exponent {:.3} (ceiling {})", k.join(", "), fit.slope, fit.ceiling),
    );
}

fn properties(out: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let kernel = StokesKernel::new(StokesKernelConfig::c8(1.0, 1.0)).unwrap();
    let random_functional = |rng: &mut ChaCha8Rng| {
        let kind = FunctionalKind::ALL[rng.gen_range(0..4)];
        CollocationFunctional {
            kind,
            point: [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)],
        }
    };

    // Gram symmetry.
    let mut sym = 0.0f64;
    for _ in 0..500 {
        let a = random_functional(&mut rng);
        let b = random_functional(&mut rng);
        let (ab, ba) = (kernel.gram_entry(&a, &b), kernel.gram_entry(&b, &a));
        sym = sym.max((ab - ba).abs() / ab.abs().max(1.0));
    }

    // Compact support.
    let mut support = true;
    for _ in 0..200 {
        let a = random_functional(&mut rng);
        let r = rng.gen_range(1.0001..3.0);
        let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let b = CollocationFunctional {
            kind: FunctionalKind::ALL[rng.gen_range(0..4)],
            point: [a.point[0] + r * t.cos(), a.point[1] + r * t.sin()],
        };
        support &= kernel.gram_entry(&a, &b) == 0.0;
    }

    // Finite differences of the basis columns.
    let mut fd = 0.0f64;
    for _ in 0..200 {
        let src = random_functional(&mut rng);
        let x = [
            src.point[0] + rng.gen_range(-0.6..0.6),
            src.point[1] + rng.gen_range(-0.6..0.6),
        ];
        fd = fd.max(column_fd_error(&kernel, &src, x));
    }

    // Permutation invariance of the level-1 solve.
    let prob = benchmark_problem();
    let (fv, gv) = (|x: Point| prob.f(x), |x: Point| prob.g(x));
    let k10 = Arc::new(StokesKernel::new(StokesKernelConfig::c8(1.0, 10.0)).unwrap());
    let base = functionals_for(&make_level_pointset(1).unwrap());
    let mut perm: Vec<usize> = (0..base.len()).collect();
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let shuffled: Vec<_> = perm.iter().map(|&i| base[i]).collect();
    let sa = solve(&assemble_functionals(base, k10.clone(), &fv, &gv)).unwrap();
    let sb = solve(&assemble_functionals(shuffled, k10, &fv, &gv)).unwrap();
    let coeff_same = perm
        .iter()
        .enumerate()
        .all(|(k, &i)| sb.coefficients[k] == sa.coefficients[i]);
    let mut perm_err = 0.0f64;
    for _ in 0..100 {
        let x = [rng.gen::<f64>(), rng.gen::<f64>()];
        let (ua, pa) = sa.evaluate(x);
        let (ub, pb) = sb.evaluate(x);
        perm_err = perm_err.max((ua[0] - ub[0]).abs()).max((ua[1] - ub[1]).abs()).max((pa - pb).abs());
    }

    // Quadrature self-consistency on the level-1 error field.
    let err = |x: Point| {
        let (u, _) = sa.evaluate(x);
        let e = (prob.u)(x);
        vec![u[0] - e[0], u[1] - e[1]]
    };
    let q100 = error_norms(err, 100).unwrap().l2;
    let q150 = error_norms(err, 150).unwrap().l2;
    let quad_rel = (q100 - q150).abs() / q150;

    let ok = sym <= 1e-12 && support && fd <= 1e-5 && coeff_same && perm_err <= 1e-10 && quad_rel <= 1e-3;
    out.report(
        "7",
        ok,
        format!(
            "gram asymmetry {sym:.1e}, support zeros {support}, worst FD rel error {fd:.1e}, \
             permuted coefficients identical {coeff_same}, permuted evaluation diff {perm_err:.1e}, \
             quadrature 100 vs 150 rel diff {quad_rel:.1e}"
        ),
    );
}

/// Largest relative disagreement between the analytic derived fields of a
/// basis column and central differences of its values.
fn column_fd_error(kernel: &StokesKernel, src: &CollocationFunctional, x: Point) -> f64 {
    let v = |p: Point| kernel.eval_basis_column(src, p);
    let shift = |p: Point, i: usize, h: f64| {
        let mut q = p;
        q[i] += h;
        q
    };
    // First derivatives: fourth-order central stencil.
    let d1 = |i: usize, c: usize| {
        let h = 1e-3;
        (-v(shift(x, i, 2.0 * h))[c] + 8.0 * v(shift(x, i, h))[c] - 8.0 * v(shift(x, i, -h))[c]
            + v(shift(x, i, -2.0 * h))[c])
            / (12.0 * h)
    };
    // Second derivatives: fourth-order central stencil.
    let d2 = |i: usize, c: usize| {
        let h = 1e-3;
        (-v(shift(x, i, 2.0 * h))[c] + 16.0 * v(shift(x, i, h))[c] - 30.0 * v(x)[c]
            + 16.0 * v(shift(x, i, -h))[c]
            - v(shift(x, i, -2.0 * h))[c])
            / (12.0 * h * h)
    };
    let nu = kernel.nu();
    let div = d1(0, 0) + d1(1, 1);
    let grad = [d1(0, 2), d1(1, 2)];
    let l = [
        -nu * (d2(0, 0) + d2(1, 0)) + grad[0],
        -nu * (d2(0, 1) + d2(1, 1)) + grad[1],
    ];
    let a_div = kernel.eval_basis_column_derivatives(src, x, FieldRequest::Divergence);
    let a_grad = kernel.eval_basis_column_derivatives(src, x, FieldRequest::PressureGradient);
    let a_l = kernel.eval_basis_column_derivatives(src, x, FieldRequest::LImage);
    // Relative to the size of the field being compared.
    let rel = |a: &[f64], b: &[f64], scale: f64| {
        a.iter()
            .zip(b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale.max(1e-300)
    };
    let mag = |a: &[f64]| a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Divergence is identically zero; compare against the velocity
    // gradient scale instead.
    let vel_grad_scale = [d1(0, 0), d1(1, 0), d1(0, 1), d1(1, 1)]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let e_div = rel(&a_div, &[div], vel_grad_scale.max(1.0));
    let e_grad = rel(&a_grad, &grad, mag(&grad).max(1.0));
    let e_l = rel(&a_l, &l, mag(&l).max(1.0));
    e_div.max(e_grad).max(e_l)
}

fn manufactured(out: &mut Outcome) {
    let prob = benchmark_problem();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut momentum, mut div, mut typo_div) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (x, y) = (rng.gen::<f64>(), rng.gen::<f64>());
        let (s5, c5, s2, c2) = ((5.0 * x).sin(), (5.0 * x).cos(), (2.0 * y).sin(), (2.0 * y).cos());
        // Hand-differentiated velocity: u = (2 c5 c2, 5 s5 s2).
        let lap = [-(50.0 + 8.0) * c5 * c2, -(125.0 + 20.0) * s5 * s2];
        let gp = [
            3.0 * (3.0 * x).cos() * (3.0 * y).sin(),
            3.0 * (3.0 * x).sin() * (3.0 * y).cos(),
        ];
        let forcing = benchmark_forcing([x, y]);
        let model_f = prob.f([x, y]);
        for i in 0..2 {
            momentum = momentum
                .max((-lap[i] + gp[i] - forcing[i]).abs())
                .max((model_f[i] - forcing[i]).abs());
        }
        let u = (prob.u)([x, y]);
        assert_eq!(u, [2.0 * c5 * c2, 5.0 * s5 * s2]);
        div = div.max((-10.0 * s5 * c2 + 10.0 * s5 * c2).abs());
        // The printed alternative u2 = 5 sin(5x) sin(y) is not solenoidal.
        typo_div = typo_div.max((-10.0 * s5 * c2 + 5.0 * s5 * y.cos()).abs());
    }
    let ok = momentum <= 1e-10 && div <= 1e-10 && typo_div > 1e-2;
    out.report(
        "8",
        ok,
        format!(
            "-nu lap u + grad p - f max {momentum:.1e}, div u max {div:.1e} with u2 = 5 sin(5x) sin(2y); \
             u2 = 5 sin(5x) sin(y) would give div up to {typo_div:.2}"
        ),
    );
}
