//! Argument parsing and the experiment runners behind each subcommand.
//!
//! Every runner prints labelled values plus `check <name>: pass/FAIL` lines
//! and writes CSV files into the output directory. The process exits zero
//! exactly when every check passed. All floats go through [`fmt_float`], so
//! two runs with the same config and seed produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::fmt_float;
use crate::error::{Error, Result};
use crate::estimates::{default_time_grid, dispersive_ratio};
use crate::geometry::{ball_volume, bump_profile, HyperbolicSpace, RadialGrid, RadialProfile};
use crate::lorentz::{holder_check, inclusion_check, lorentz_norm, LorentzExponents};
use crate::params::{admissible_range, local_upper_bound, phi_p, ParameterSet};
use crate::propagator::{Propagator, WaveState};
use crate::scattering::{
    asymptotic_data, decay_rate_fit, scattering_defects, stability_experiment,
    weighted_defect_trace,
};
use crate::solver::{
    gamma_trace, residual, scale_to_data_norm, solve_global, Nonlinearity, SolveOptions, TimeGrid,
};
use crate::transform::{SpectralGrid, SphericalTransform};

#[derive(Parser, Debug)]
#[command(
    name = "hypwave",
    about = "Spectral solver and verification harness for radial waves on hyperbolic space"
)]
pub struct Cli {
    /// Flat key = value config file applied over the built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Single key=value override; repeatable, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,

    /// Output directory (shorthand for --set out=DIR).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<String>,

    /// RNG seed (shorthand for --set seed=N).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads, 0 = library default (shorthand for --set threads=N).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the derived exponent table and its identity residuals.
    Params,
    /// Calibrate the transform and verify its core identities.
    Selftest,
    /// Sweep the dispersive ratio against the decay envelope.
    Dispersive,
    /// Global small-data solve with contraction log and residual.
    Solve,
    /// Scattering data, defect decay and the rate fit.
    Scatter,
    /// Separation traces of two nearby solutions.
    Stability,
}

/// Collects check outcomes; the run fails (nonzero exit) if any check does.
struct CheckList {
    failed: Vec<String>,
}

impl CheckList {
    fn new() -> Self {
        Self { failed: Vec::new() }
    }

    fn assert(&mut self, name: &str, ok: bool, detail: &str) {
        if ok {
            println!("check {name}: pass ({detail})");
        } else {
            println!("check {name}: FAIL ({detail})");
            self.failed.push(name.to_string());
        }
    }

    fn finish(self) -> Result<()> {
        if self.failed.is_empty() {
            Ok(())
        } else {
            Err(Error::ConstraintViolation(format!(
                "failed checks: {}",
                self.failed.join(", ")
            )))
        }
    }
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(header);
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

/// Everything a dynamic experiment needs, wired from the config.
struct Workbench {
    tf: Arc<SphericalTransform>,
    prop: Propagator,
    ps: ParameterSet,
    grid: TimeGrid,
    nl: Nonlinearity,
    data: WaveState,
}

fn derive_params(cfg: &ExperimentConfig) -> Result<ParameterSet> {
    ParameterSet::derive(cfg.n, cfg.b, cfg.sigma)?
        .with_offset(cfg.h)?
        .with_secondary(cfg.d)
}

fn build_transform(cfg: &ExperimentConfig) -> Result<Arc<SphericalTransform>> {
    let space = HyperbolicSpace::new(cfg.n)?;
    let rgrid = RadialGrid::gauss_legendre(space, cfg.r_max, cfg.r_panels, cfg.r_per_panel)?;
    let sgrid =
        SpectralGrid::gauss_legendre(cfg.lambda_max, cfg.lambda_panels, cfg.lambda_per_panel)?;
    Ok(Arc::new(SphericalTransform::calibrated(&rgrid, &sgrid)?))
}

fn build_workbench(cfg: &ExperimentConfig) -> Result<Workbench> {
    let tf = build_transform(cfg)?;
    let prop = Propagator::new(&tf, cfg.mass_shift)?;
    let ps = derive_params(cfg)?;
    let grid = TimeGrid::for_params(&ps, cfg.t_max, cfg.t_core, cfg.t_tail)?;
    let nl = Nonlinearity::new(cfg.b, cfg.mu, cfg.sign)?;
    let raw = WaveState {
        u: RadialProfile::zeros(tf.radial_grid()),
        ut: bump_profile(tf.radial_grid(), cfg.data_radius),
    };
    let data = scale_to_data_norm(&prop, &raw, &ps, &grid, cfg.eps)?;
    Ok(Workbench { tf, prop, ps, grid, nl, data })
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for s in &cli.sets {
        cfg.apply_set(s)?;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    cfg.validate()?;
    if cfg.threads > 0 {
        // Ignore the error when a pool already exists (e.g. repeat calls in
        // one process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    let out = PathBuf::from(&cfg.out);
    fs::create_dir_all(&out)?;
    fs::write(out.join("effective.cfg"), cfg.emit())?;

    let mut checks = CheckList::new();
    match cli.command {
        Command::Params => run_params(&cfg, &mut checks)?,
        Command::Selftest => run_selftest(&cfg, &out, &mut checks)?,
        Command::Dispersive => run_dispersive(&cfg, &out, &mut checks)?,
        Command::Solve => run_solve(&cfg, &out, &mut checks)?,
        Command::Scatter => run_scatter(&cfg, &out, &mut checks)?,
        Command::Stability => run_stability(&cfg, &out, &mut checks)?,
    }
    checks.finish()
}

fn print_row(name: &str, value: f64) {
    println!("{name:<18} {}", fmt_float(value));
}

fn run_params(cfg: &ExperimentConfig, checks: &mut CheckList) -> Result<()> {
    let ps = derive_params(cfg)?;
    let (b_low, b_high) = admissible_range(cfg.n, cfg.sigma)?;
    println!("derived parameters (n = {}, b = {}, sigma = {}):", cfg.n, cfg.b, cfg.sigma);
    print_row("b_low", b_low);
    print_row("b_high", b_high);
    print_row("local_upper_bound", local_upper_bound(cfg.n)?);
    print_row("beta", ps.beta());
    print_row("alpha_tilde", ps.alpha_tilde());
    print_row("alpha", ps.alpha());
    print_row("b*alpha", ps.b() * ps.alpha());
    print_row("b*alpha_tilde", ps.b() * ps.alpha_tilde());
    print_row("max_offset", ps.max_offset());
    print_row("h", ps.h());
    print_row("d", ps.d());
    print_row("t0", ps.t0());
    print_row("delta", ps.delta());
    print_row("c_phi", ps.c_phi());
    println!("identity residuals:");
    for (name, r) in ps.identity_residuals() {
        print_row(name, r);
        checks.assert(
            &format!("identity {name}"),
            r.abs() <= 1e-12,
            &format!("|residual| = {}", fmt_float(r.abs())),
        );
    }
    Ok(())
}

fn run_selftest(cfg: &ExperimentConfig, out: &Path, checks: &mut CheckList) -> Result<()> {
    let tf = build_transform(cfg)?;
    let cal = tf.calibration().expect("calibrated by construction");
    print_row("calibration", cal);
    print_row("quadrature_defect", tf.radial_grid().quadrature_defect());

    // Transform round trip and Plancherel on a profile whose spectral
    // content sits far below lambda_max, so the defects measure quadrature
    // and calibration rather than truncation.
    let f = RadialProfile::from_fn(tf.radial_grid(), |r| (1.0 + 0.3 * r * r) * (-0.5 * r * r).exp());
    let fhat = tf.forward(&f)?;
    let back = tf.inverse(&fhat)?;
    let rt = back.sub(&f)?.sup_norm() / f.sup_norm();
    checks.assert("transform_round_trip", rt <= 1e-6, &format!("defect {}", fmt_float(rt)));
    let phys = tf.l2_physical_sq(&f);
    let spectral = tf.l2_spectral_sq(&fhat)?;
    let pl = ((phys - spectral) / phys).abs();
    checks.assert("plancherel", pl <= 1e-6, &format!("defect {}", fmt_float(pl)));

    // Flow identities: energy conservation and the group law.
    let prop = Propagator::new(&tf, cfg.mass_shift)?;
    let s0 = prop.to_spectral(&WaveState {
        u: RadialProfile::zeros(tf.radial_grid()),
        ut: f.clone(),
    })?;
    let e0 = prop.spectral_energy(&s0);
    let mut drift = 0.0f64;
    for t in [1.0, 5.0] {
        let e = prop.spectral_energy(&prop.flow_spectral(t, &s0));
        drift = drift.max(((e - e0) / e0).abs());
    }
    checks.assert("energy_conservation", drift <= 1e-8, &format!("drift {}", fmt_float(drift)));
    let one_step = prop.flow_spectral(1.0, &s0);
    let two_step = prop.flow_spectral(0.3, &prop.flow_spectral(0.7, &s0));
    let scale = one_step.u.sup_norm().max(one_step.ut.sup_norm());
    let gd = (one_step.u.sub(&two_step.u)?.sup_norm().max(one_step.ut.sub(&two_step.ut)?.sup_norm()))
        / scale;
    checks.assert("group_law", gd <= 1e-6, &format!("defect {}", fmt_float(gd)));

    // Norm identities on two radial resolutions.
    let mut rows: Vec<Vec<String>> = Vec::new();
    let space = HyperbolicSpace::new(cfg.n)?;
    let vol = ball_volume(cfg.n, 1.0)?;
    let mut worst_closed = 0.0f64;
    let mut inclusion_ok = true;
    for scale_up in [1usize, 2] {
        let rg = RadialGrid::gauss_legendre(
            space,
            cfg.r_max,
            cfg.r_panels,
            cfg.r_per_panel * scale_up,
        )?;
        let resolution = rg.len().to_string();
        let ind = RadialProfile::from_fn(&rg, |r| if r <= 1.0 { 1.0 } else { 0.0 });
        for (p, q) in [(cfg.b + 1.0, 2.0), (2.0, 2.0)] {
            let lhs = lorentz_norm(&ind, LorentzExponents::new(p, q)?)?;
            let rhs = (p / q).powf(1.0 / q) * vol.powf(1.0 / p);
            let ratio = lhs / rhs;
            worst_closed = worst_closed.max((ratio - 1.0).abs());
            rows.push(vec![
                format!("indicator_p{p}_q{q}"),
                fmt_float(lhs),
                fmt_float(rhs),
                fmt_float(ratio),
                resolution.clone(),
            ]);
        }
        // (p, p) agrees with the plain L^p quadrature by construction.
        let g = RadialProfile::from_fn(&rg, |r| (-r * r).exp());
        let p = cfg.b;
        let lhs = lorentz_norm(&g, LorentzExponents::new(p, p)?)?;
        let rhs = g
            .values()
            .iter()
            .zip(rg.weights())
            .map(|(v, w)| v.abs().powf(p) * w)
            .sum::<f64>()
            .powf(1.0 / p);
        worst_closed = worst_closed.max((lhs / rhs - 1.0).abs());
        rows.push(vec![
            format!("lp_match_p{p}"),
            fmt_float(lhs),
            fmt_float(rhs),
            fmt_float(lhs / rhs),
            resolution.clone(),
        ]);
        // Holder and the inclusion chain.
        let h = holder_check(
            &g,
            &ind,
            LorentzExponents::new(3.0, 2.0)?,
            LorentzExponents::new(6.0, 2.0)?,
            LorentzExponents::new(2.0, 1.0)?,
        )?;
        rows.push(vec![
            "holder_3_6_2".into(),
            fmt_float(h.lhs),
            fmt_float(h.rhs),
            fmt_float(h.ratio),
            resolution.clone(),
        ]);
        if h.ratio > 1.0 + 1e-9 {
            inclusion_ok = false;
        }
        let inc = inclusion_check(&g, cfg.b + 1.0, 2.0, 2.0 * (cfg.b + 1.0))?;
        inclusion_ok &= inc.ok;
        for link in &inc.links {
            rows.push(vec![
                format!("inclusion_q{}_to_q{}", link.q_inner, link.q_outer),
                fmt_float(link.ratio),
                fmt_float(link.bound),
                fmt_float(link.ratio / link.bound),
                resolution.clone(),
            ]);
        }
    }
    checks.assert(
        "lorentz_closed_forms",
        worst_closed <= 1e-9,
        &format!("worst defect {}", fmt_float(worst_closed)),
    );

    // Sharp-constant inclusions on seeded random smooth profiles.
    let rg = tf.radial_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..10 {
        let mut centers: Vec<(f64, f64, f64)> = Vec::new();
        for _ in 0..3 {
            centers.push((
                rng.gen_range(0.2..3.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.0..cfg.data_radius),
            ));
        }
        let g = RadialProfile::from_fn(rg, |r| {
            centers.iter().map(|(a, w, c)| a * (-w * (r - c) * (r - c)).exp()).sum::<f64>()
        });
        let inc = inclusion_check(&g, cfg.b + 1.0, 1.5, 8.0)?;
        inclusion_ok &= inc.ok;
    }
    checks.assert("lorentz_inclusion", inclusion_ok, "nesting constants respected");

    write_csv(&out.join("lorentz_checks.csv"), "test_id,lhs,rhs,ratio,grid_resolution", &rows)?;
    println!("wrote {}", out.join("lorentz_checks.csv").display());
    Ok(())
}

fn run_dispersive(cfg: &ExperimentConfig, out: &Path, checks: &mut CheckList) -> Result<()> {
    let wb = build_workbench(cfg)?;
    let ps = &wb.ps;
    let p = ps.b() + 1.0;
    let r = 2.0;
    let times = default_time_grid(ps.t0(), cfg.t_max, 16, 25)?;
    let g = bump_profile(wb.tf.radial_grid(), cfg.data_radius);
    let rep = dispersive_ratio(&wb.prop, &g, p, r, &times)?;

    let mut rows = Vec::with_capacity(rep.samples.len());
    for &(t, ratio) in &rep.samples {
        let weight = phi_p(t, p, cfg.n)?;
        let branch = if t.abs() >= ps.t0() { "tail" } else { "core" };
        rows.push(vec![
            fmt_float(t),
            fmt_float(ratio * weight * rep.source_norm),
            fmt_float(weight),
            fmt_float(ratio),
            branch.to_string(),
        ]);
    }
    write_csv(&out.join("estimates.csv"), "t,norm,weight,weighted_value,branch", &rows)?;
    println!("wrote {}", out.join("estimates.csv").display());

    print_row("sup_ratio", rep.sup);
    print_row("source_norm", rep.source_norm);
    print_row("envelope_c_phi", ps.c_phi());
    println!("skipped_singular_term = {}", rep.skipped_singular_term);
    checks.assert(
        "dispersive_sup_finite",
        rep.sup.is_finite() && rep.sup > 0.0,
        &format!("sup {}", fmt_float(rep.sup)),
    );

    // Same sweep on doubled spatial and spectral resolution; the measured
    // constant must be a property of the operator, not of the grid.
    let mut fine = cfg.clone();
    fine.r_per_panel *= 2;
    fine.lambda_per_panel *= 2;
    let tf2 = build_transform(&fine)?;
    let prop2 = Propagator::new(&tf2, cfg.mass_shift)?;
    let g2 = bump_profile(tf2.radial_grid(), cfg.data_radius);
    let rep2 = dispersive_ratio(&prop2, &g2, p, r, &times)?;
    let rel = ((rep2.sup - rep.sup) / rep.sup).abs();
    print_row("sup_ratio_fine", rep2.sup);
    checks.assert(
        "dispersive_grid_stability",
        rel <= 0.05,
        &format!("refinement moved the sup by {}", fmt_float(rel)),
    );
    Ok(())
}

fn run_solve(cfg: &ExperimentConfig, out: &Path, checks: &mut CheckList) -> Result<()> {
    let wb = build_workbench(cfg)?;
    let ps = &wb.ps;
    let opts = SolveOptions { max_iter: cfg.max_iter, tol: cfg.tol, keep_iterates: true };
    let (traj, diag) = solve_global(&wb.prop, &wb.data, &wb.nl, ps, &wb.grid, &opts)?;

    print_row("eps", diag.eps);
    print_row("k_measured", diag.k_measured);
    print_row("contraction_l", diag.l);
    print_row("final_norm", diag.final_norm);
    println!("iterations = {}", diag.iterations);

    let gammas = gamma_trace(&diag.iterates, &wb.prop, ps, ps.d(), ps.h())?;
    let mut rows = Vec::new();
    for m in 1..=diag.iterates.len() {
        rows.push(vec![
            m.to_string(),
            fmt_float(diag.diff_norms[m - 1]),
            if m >= 2 { fmt_float(diag.ratios[m - 2]) } else { String::new() },
            fmt_float(gammas[m - 1]),
        ]);
    }
    write_csv(&out.join("iterations.csv"), "m,diff_norm_E,ratio,Gamma_m_h_d", &rows)?;
    println!("wrote {}", out.join("iterations.csv").display());

    let e_inf = LorentzExponents::new(ps.b() + 1.0, f64::INFINITY)?;
    let e_d = LorentzExponents::new(ps.b() + 1.0, ps.d())?;
    let mut rows = Vec::new();
    for (k, &t) in traj.grid().nodes().iter().enumerate() {
        if t == 0.0 {
            continue;
        }
        let u = wb.prop.transform().inverse(&traj.states()[k].u)?;
        rows.push(vec![
            fmt_float(t),
            fmt_float(lorentz_norm(&u, e_inf)?),
            fmt_float(lorentz_norm(&u, e_d)?),
        ]);
    }
    write_csv(&out.join("solution.csv"), "t,norm_b1_inf,norm_b1_d", &rows)?;
    println!("wrote {}", out.join("solution.csv").display());

    checks.assert("solve_converged", traj.converged(), &format!("{} iterations", diag.iterations));
    checks.assert("contraction", diag.l < 1.0, &format!("L = {}", fmt_float(diag.l)));
    let ratios_ok = diag.ratios.iter().all(|r| *r <= diag.l * (1.0 + 1e-9));
    checks.assert("ratios_below_l", ratios_ok, "every Picard quotient below L");
    checks.assert(
        "ball_invariance",
        diag.final_norm <= 2.0 * diag.eps * (1.0 + 1e-9),
        &format!("{} vs 2 eps = {}", fmt_float(diag.final_norm), fmt_float(2.0 * diag.eps)),
    );

    // Uniform iterate bound Gamma_m <= Gamma_1 / (1 - L_{d,h}).
    let coeff = gamma_trace(&diag.iterates, &wb.prop, ps, f64::INFINITY, 0.0)?;
    let bm1 = ps.b() - 1.0;
    let mut k_dh = 0.0f64;
    for m in 0..gammas.len() - 1 {
        let denom = coeff[m].powf(bm1) * gammas[m];
        if denom > 0.0 {
            k_dh = k_dh.max((gammas[m + 1] - gammas[0]).max(0.0) / denom);
        }
    }
    let l_dh = k_dh * 2f64.powf(bm1) * diag.eps.powf(bm1);
    print_row("l_dh", l_dh);
    let bound = gammas[0] / (1.0 - l_dh);
    let gamma_ok = l_dh < 1.0 && gammas.iter().all(|g| *g <= bound * (1.0 + 1e-9));
    checks.assert(
        "iterate_norm_bound",
        gamma_ok,
        &format!("Gamma_1/(1 - L_dh) = {}", fmt_float(bound)),
    );

    let res = residual(&traj, &wb.prop, &wb.data, &wb.nl, ps)?;
    print_row("residual", res);
    checks.assert(
        "integral_equation_residual",
        res <= 10.0 * cfg.tol,
        &format!("{} vs 10 tol = {}", fmt_float(res), fmt_float(10.0 * cfg.tol)),
    );
    Ok(())
}

fn run_scatter(cfg: &ExperimentConfig, out: &Path, checks: &mut CheckList) -> Result<()> {
    let wb = build_workbench(cfg)?;
    let ps = &wb.ps;
    let opts = SolveOptions { max_iter: cfg.max_iter, tol: cfg.tol, keep_iterates: false };
    let (traj, diag) = solve_global(&wb.prop, &wb.data, &wb.nl, ps, &wb.grid, &opts)?;
    checks.assert("solve_converged", traj.converged(), &format!("{} iterations", diag.iterations));

    let scat = asymptotic_data(&traj, &wb.prop, &wb.nl)?;
    print_row("t_cut", scat.t_cut);
    print_row("integrand_decay_rate", scat.decay_rate);
    print_row("truncation_bound", scat.truncation_bound);
    checks.assert(
        "truncation_bound_finite",
        scat.truncation_bound.is_finite(),
        &format!("bound {}", fmt_float(scat.truncation_bound)),
    );

    let defects = scattering_defects(&traj, &wb.prop, &scat, &wb.nl, ps)?;
    let rate = ps.b() * ps.alpha() + ps.h();
    let e_d = LorentzExponents::new(ps.b() + 1.0, ps.d())?;
    let s0 = wb.prop.to_spectral(&wb.data)?;
    let mut rows = Vec::with_capacity(defects.len());
    for d in &defects {
        let lin = wb.prop.flow_spectral(d.t, &s0);
        let lin_norm = lorentz_norm(&wb.prop.transform().inverse(&lin.u)?, e_d)?;
        rows.push(vec![
            fmt_float(d.t),
            fmt_float(d.direct),
            fmt_float((rate * d.t).exp() * d.direct),
            fmt_float(lin_norm),
        ]);
    }
    write_csv(&out.join("scattering.csv"), "t,defect,weighted_defect,linear_trace", &rows)?;
    println!("wrote {}", out.join("scattering.csv").display());

    let scale = defects.iter().map(|d| d.direct).fold(0.0f64, f64::max);
    let gap = defects
        .iter()
        .map(|d| (d.direct - d.tail).abs())
        .fold(0.0f64, f64::max);
    checks.assert(
        "defect_formulas_agree",
        gap <= 10.0 * cfg.tol + 1e-3 * scale,
        &format!("max gap {}", fmt_float(gap)),
    );

    let samples: Vec<(f64, f64)> = defects.iter().map(|d| (d.t, d.direct)).collect();
    let window = (ps.t0() + 2.0, cfg.t_max - 1.0);
    let fit = decay_rate_fit(&samples, window, 1e-14)?;
    let target = -rate + 0.05;
    if fit.floored {
        checks.assert("defect_decay_rate", true, "defect decayed to the floor");
    } else {
        print_row("defect_slope", fit.slope);
        checks.assert(
            "defect_decay_rate",
            fit.slope <= target,
            &format!("slope {} vs target {}", fmt_float(fit.slope), fmt_float(target)),
        );
    }

    let trace = weighted_defect_trace(&samples, rate);
    let picks: Vec<f64> = trace.iter().map(|&(_, v)| v).step_by(8).collect();
    let decreasing = picks.windows(2).all(|w| w[1] < w[0]);
    checks.assert(
        "weighted_defect_decreasing",
        decreasing,
        "e^{(b alpha + h) t} defect falls along the tail",
    );
    Ok(())
}

fn run_stability(cfg: &ExperimentConfig, out: &Path, checks: &mut CheckList) -> Result<()> {
    let wb = build_workbench(cfg)?;
    let ps = &wb.ps;
    let opts = SolveOptions { max_iter: cfg.max_iter, tol: cfg.tol, keep_iterates: false };

    // Perturb the velocity by a narrower bump carrying 1/20 of the data norm.
    let raw = WaveState {
        u: RadialProfile::zeros(wb.tf.radial_grid()),
        ut: bump_profile(wb.tf.radial_grid(), 0.5 * cfg.data_radius),
    };
    let pert = scale_to_data_norm(&wb.prop, &raw, ps, &wb.grid, cfg.eps / 20.0)?;
    let data_b = WaveState {
        u: wb.data.u.add_scaled(&pert.u, 1.0)?,
        ut: wb.data.ut.add_scaled(&pert.ut, 1.0)?,
    };

    let (rep, diag_a, diag_b) =
        stability_experiment(&wb.prop, &wb.data, &data_b, &wb.nl, ps, &wb.grid, &opts)?;
    print_row("data_distance", rep.data_distance);
    print_row("sup_ratio", rep.sup_ratio);
    let l = diag_a.l.max(diag_b.l);
    let bound = 1.0 / (1.0 - l);
    print_row("amplification_bound", bound);

    let mut rows = Vec::with_capacity(rep.times.len());
    for (k, &t) in rep.times.iter().enumerate() {
        rows.push(vec![
            fmt_float(t),
            fmt_float(rep.nonlinear_trace[k]),
            fmt_float(rep.linear_trace[k]),
        ]);
    }
    write_csv(&out.join("stability.csv"), "t,nonlinear_trace,linear_trace", &rows)?;
    println!("wrote {}", out.join("stability.csv").display());

    checks.assert(
        "stability_amplification",
        l < 1.0 && rep.sup_ratio <= bound * (1.0 + 1e-6),
        &format!("ratio {} vs 1/(1-L) = {}", fmt_float(rep.sup_ratio), fmt_float(bound)),
    );
    let picks: Vec<f64> = rep.nonlinear_trace.iter().copied().step_by(8).collect();
    let decreasing = picks.windows(2).all(|w| w[1] < w[0]);
    checks.assert(
        "weighted_separation_decreasing",
        decreasing,
        "e^{(alpha + h) t} separation falls along the tail",
    );
    Ok(())
}
