use std::fs;
use std::io::Write;
use std::path::Path;

use cusp_eta::format::g15;
use cusp_eta::sturm_liouville::{integrate_theta, InitialData, MeasureGrid, Potential, StepOptions};
use cusp_eta::{
    build_measure, build_rep, check_commutator_identity, check_conformal_dirac, check_connection_condition,
    circle_dirac, cylinder_closed_form, diagnose, regularised_eta, CuspContext, CuspShape, CutoffProfile,
    EquivariantSpectrum, Error, EtaNumerics, RegularisedOptions, Sign,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Command, NumericArgs, PotentialArgs, ShapeArgs, SignArg};

type Out<'a> = &'a mut dyn Write;

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn csv_header(out: Out, what: &str, columns: &str) -> Result<(), Error> {
    writeln!(out, "# version cusp-eta {VERSION} {what}")?;
    writeln!(out, "{columns}")?;
    Ok(())
}

fn positive(name: &str, x: f64) -> Result<f64, Error> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::InvalidInput(format!("--{name} = {x} must be positive")))
    }
}

fn shape_from(args: &ShapeArgs) -> Result<CuspShape, Error> {
    let s = &args.source;
    if let Some(path) = &s.shape {
        CuspShape::load(path)
    } else if let Some(mu) = s.mu {
        CuspShape::mulog(mu, args.a)
    } else {
        CuspShape::zero(args.a)
    }
}

fn potential_from(args: &PotentialArgs) -> Result<Potential, Error> {
    let s = &args.source;
    if let Some(c) = s.constant {
        return Ok(Potential::constant(c));
    }
    if s.harmonic {
        return Ok(Potential::harmonic());
    }
    if s.linear {
        return Ok(Potential::linear());
    }
    let shape = if let Some(path) = &s.shape {
        CuspShape::load(path)?
    } else if let Some(mu) = s.mu {
        CuspShape::mulog(mu, args.a)?
    } else {
        CuspShape::zero(args.a)?
    };
    let sign = match args.sign {
        SignArg::Plus => Sign::Plus,
        SignArg::Minus => Sign::Minus,
    };
    Potential::from_shape(&shape, args.lambda, sign)
}

fn numerics_from(args: &NumericArgs) -> Result<EtaNumerics, Error> {
    let mut n = EtaNumerics::default();
    if let Some(s) = args.s_min {
        n.s_min = Some(positive("s-min", s)?);
    }
    if let Some(s) = args.s_max {
        n.s_max = Some(positive("s-max", s)?);
    }
    if let Some(l) = args.lambda_cutoff {
        n.lambda_cutoff = Some(positive("lambda-cutoff", l)?);
    }
    if let Some(w) = args.log_s_panel {
        n.log_s_panel = positive("log-s-panel", w)?;
    }
    n.truncated = !args.complete;
    Ok(n)
}

fn load_spectrum(path: &Path) -> Result<EquivariantSpectrum, Error> {
    EquivariantSpectrum::load(path)
}

pub fn dispatch(command: Command, out: Out) -> Result<(), Error> {
    match command {
        Command::Diagnose { shape, p, b } => {
            let d = diagnose(&shape_from(&shape)?, p, positive("b", b)?);
            writeln!(out, "complete {}", d.complete)?;
            writeln!(out, "finite_volume {}", d.finite_volume)?;
            writeln!(out, "weakly_admissible {}", d.weakly_admissible)?;
            writeln!(out, "strongly_admissible {}", d.strongly_admissible)?;
            if let Some(w) = d.weak_witness {
                writeln!(out, "# weak witness alpha {} beyond x = {}", g15(w.alpha), g15(w.threshold))?;
            }
        }
        Command::SpectrumGen { shift, alpha, n_max } => {
            write!(out, "{}", circle_dirac(shift, alpha, n_max).to_file_string())?;
        }
        Command::SlSolve { potential, nu, nu_im, y_max, points } => sl_solve(&potential, nu, nu_im, y_max, points, out)?,
        Command::SlMeasure { potential, nu_max } => {
            let q = potential_from(&potential)?;
            let m = build_measure(&q, nu_max, &MeasureGrid::default())?;
            csv_header(out, "sl-measure", "kind,nu,density,quad_weight,mass")?;
            for a in &m.atoms {
                writeln!(out, "atom,{},,,{}", g15(a.nu), g15(a.weight))?;
            }
            for c in &m.continuum {
                writeln!(
                    out,
                    "density,{},{},{},{}",
                    g15(c.nu),
                    g15(c.density),
                    g15(c.quad_weight),
                    g15(c.density * c.quad_weight)
                )?;
            }
        }
        Command::Eta { shape, spectrum, a_prime, p, numerics, no_short_circuit, per_lambda } => {
            let mut n = numerics_from(&numerics)?;
            n.short_circuit = !no_short_circuit;
            let spec = load_spectrum(&spectrum)?;
            let r = CuspContext::new(shape_from(&shape)?).contribution(&spec, a_prime, p, &n)?;
            writeln!(out, "{} {} {}", g15(r.value.re), g15(r.value.im), g15(r.error_estimate))?;
            let d = &r.diagnostics;
            writeln!(out, "symmetric {}", r.symmetric)?;
            for (k, v) in [
                ("s_min", d.s_min),
                ("s_max", d.s_max),
                ("head_mass", d.head_mass),
                ("tail_mass", d.tail_mass),
                ("lambda_tail_bound", d.lambda_tail_bound),
                ("measure_truncation", d.measure_truncation),
                ("quadrature_error", d.quadrature_error),
                ("measure_error", d.measure_error),
            ] {
                writeln!(out, "{k} {}", g15(v))?;
            }
            writeln!(out, "measure_nodes {}", d.measure_nodes)?;
            if let Some(path) = per_lambda {
                let mut f = Vec::new();
                csv_header(&mut f, "eta per-lambda", "abs_lambda,re,im")?;
                for c in &r.per_lambda {
                    writeln!(f, "{},{},{}", g15(c.abs_lambda), g15(c.value.re), g15(c.value.im))?;
                }
                fs::write(path, f)?;
            }
        }
        Command::EtaCyl { spectrum, a_dd } => {
            let r = cylinder_closed_form(&load_spectrum(&spectrum)?, a_dd)?;
            writeln!(out, "{} {} {}", g15(r.eta.value.re), g15(r.eta.value.im), g15(r.eta.error))?;
            writeln!(out, "remainder {} {}", g15(r.remainder.re), g15(r.remainder.im))?;
        }
        Command::EtaReg { shape, spectrum, eps, p, t_min, t_max, numerics } => {
            let shape = shape_from(&shape)?;
            let opts = RegularisedOptions {
                t_range: match (t_min, t_max) {
                    (Some(lo), Some(hi)) => Some((positive("t-min", lo)?, positive("t-max", hi)?)),
                    _ => None,
                },
                numerics: numerics_from(&numerics)?,
                ..RegularisedOptions::default()
            };
            let psi = CutoffProfile::smoothstep(shape.a());
            let ctx = CuspContext::new(shape);
            let r = regularised_eta(&ctx, &load_spectrum(&spectrum)?, &psi, &eps, p, &opts)?;
            writeln!(out, "{} {} {}", g15(r.value.re), g15(r.value.im), g15(r.error_estimate))?;
            for s in &r.samples {
                writeln!(
                    out,
                    "eps {} limit {} {} fit_residual {}",
                    g15(s.eps),
                    g15(s.limit.re),
                    g15(s.limit.im),
                    g15(s.fit_residual)
                )?;
            }
        }
        Command::VerifyClifford { p, trials, seed } => verify_clifford(&p, trials, seed, out)?,
    }
    Ok(())
}

fn sl_solve(args: &PotentialArgs, nu: f64, nu_im: f64, y_max: f64, points: usize, out: Out) -> Result<(), Error> {
    let q = potential_from(args)?;
    positive("y-max", y_max)?;
    if points == 0 {
        return Err(Error::InvalidInput("--points must be positive".into()));
    }
    let grid: Vec<f64> = (1..=points).map(|k| y_max * k as f64 / points as f64).collect();
    let nu = Complex64::new(nu, nu_im);
    csv_header(out, "sl-solve", "init,y,theta_re,theta_im,dtheta_re,dtheta_im")?;
    for (name, init) in [("theta1", InitialData::Theta1), ("theta2", InitialData::Theta2)] {
        let sol = integrate_theta(&q, nu, init, y_max, &grid, &StepOptions::default())?;
        let mut samples = sol.samples.iter();
        for &y in &grid {
            let s = samples
                .find(|s| s.y == y)
                .ok_or_else(|| Error::InvalidInput(format!("no sample at y = {y}")))?;
            let t = s.theta().ok_or(Error::Overflow { y })?;
            let dt = s.dtheta().ok_or(Error::Overflow { y })?;
            writeln!(out, "{name},{},{},{},{},{}", g15(y), g15(t.re), g15(t.im), g15(dt.re), g15(dt.im))?;
        }
    }
    Ok(())
}

fn verify_clifford(ps: &[usize], trials: usize, seed: u64, out: Out) -> Result<(), Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(String, usize, f64, f64)> = Vec::new();
    for &p in ps {
        let rep = build_rep(p)?;
        rows.push(("relations".into(), p, rep.residuals().max(), 1e-12));
        let mut comm = 0.0f64;
        let mut conn = 0.0f64;
        let mut defect = 0.0f64;
        for _ in 0..trials {
            let mut v = || (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<f64>>();
            let (u, v1, w) = (v(), v(), v());
            comm = comm.max(check_commutator_identity(&rep, &u, &v1, &w)?);
            let f = rng.gen_range(-2.0..2.0);
            let r = check_connection_condition(&rep, &u, f, &v1, &w)?;
            conn = conn.max(r.clifford_residual);
            let b: f64 = u.iter().zip(&v1).map(|(a, b)| a * b).sum();
            defect = defect.max((r.hermiticity_defect - (2.0 * f - 1.0).abs() * b.abs()).abs() / (1.0 + b.abs()));
            let half = check_connection_condition(&rep, &u, 0.5, &v1, &w)?;
            defect = defect.max(half.hermiticity_defect);
        }
        rows.push(("commutator".into(), p, comm, 1e-12));
        rows.push(("connection".into(), p, conn, 1e-12));
        rows.push(("hermiticity_defect".into(), p, defect, 1e-12));
    }
    let rep = build_rep(2)?;
    let levels = [8, 16, 32, 64];
    for (name, r) in [
        ("conformal_order_linear", check_conformal_dirac(&rep, |x| x, |_| 1.0, &levels)?),
        ("conformal_order_log", check_conformal_dirac(&rep, |x| -(x + 1.0).ln(), |x| -1.0 / (x + 1.0), &levels)?),
    ] {
        rows.push((name.into(), 2, (r.order - 2.0).abs(), 0.2));
    }
    let flat = check_conformal_dirac(&rep, |_| 0.7, |_| 0.0, &levels)?;
    rows.push(("conformal_constant".into(), 2, flat.residuals.iter().fold(0.0, |m: f64, r| m.max(*r)), 1e-10));

    writeln!(out, "check p residual tolerance status")?;
    let mut failed = 0;
    for (name, p, r, tol) in &rows {
        let ok = *r < *tol;
        failed += usize::from(!ok);
        writeln!(out, "{name} {p} {} {} {}", g15(*r), g15(*tol), if ok { "pass" } else { "FAIL" })?;
    }
    if failed > 0 {
        return Err(Error::NonConvergence { context: "verify-clifford", detail: format!("{failed} checks failed") });
    }
    Ok(())
}
