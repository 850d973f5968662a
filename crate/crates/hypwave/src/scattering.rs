//! Scattering data and decay diagnostics for the nonlinear flow.
//!
//! Writing the state pair U(t) = (u, u_t) and the linear group G(t), the
//! integral equation reads U(t) = G(t)[U_0 + integral_0^t G(-s)(0, F(s)) ds],
//! so the forward scattering data is the t -> infinity limit of the bracket:
//!     u0+ = u0 - integral_0^inf W(s) F(u(s)) ds,
//!     u1+ = u1 + integral_0^inf Wdot(s) F(u(s)) ds.
//! Both integrals are the solver's panel rule with the kernel centered at
//! t = 0, truncated at the trajectory horizon; the discarded tail is bounded
//! by fitting the observed exponential decay of the integrand.
//!
//! The defect U(t) - G(t)U+ then equals the tail integral
//! -integral_t^inf G(t-s)(0, F(s)) ds, which gives two independently
//! computable expressions for the same quantity; their agreement is a
//! consistency check on the trajectory, and the decay rate of either is the
//! scattering rate.

use crate::error::{Error, Result};
use crate::estimates::weighted_norm;
use crate::lorentz::{lorentz_norm, LorentzExponents};
use crate::params::ParameterSet;
use crate::propagator::{Propagator, SpectralState, WaveState};
use crate::solver::{
    forcing_spectral, integrate_panels, solve_global, ContractionDiagnostics, Nonlinearity,
    SolveOptions, TimeGrid, TrajectorySolution,
};
use crate::transform::SpectralProfile;

/// Time reversal on data: (u0, u1) -> (u0, -u1). Solving forward with the
/// reflected pair walks the original solution backward.
pub fn reflect_data(data: &WaveState) -> WaveState {
    WaveState { u: data.u.clone(), ut: data.ut.scale(-1.0) }
}

/// Same reversal on a spectral pair; composing a forward scattering state of
/// the reflected solution with this map yields the backward scattering data
/// of the original.
pub fn reflect_spectral(state: &SpectralState) -> SpectralState {
    SpectralState { u: state.u.clone(), ut: state.ut.scale(-1.0) }
}

/// Truncated scattering data together with a bound on what the truncation
/// discarded.
#[derive(Debug)]
pub struct ScatteringData {
    /// (u0+, u1+) as spectral profiles.
    pub state: SpectralState,
    /// Horizon of the integral.
    pub t_cut: f64,
    /// Fitted exponential decay rate of the integrand's energy norm.
    pub decay_rate: f64,
    /// Energy-norm bound on the discarded tail: value at the cut divided by
    /// the fitted rate. Zero forcing gives zero; a non-decaying integrand
    /// gives infinity rather than a fake bound.
    pub truncation_bound: f64,
}

fn energy_norm(prop: &Propagator, values: &[f64]) -> f64 {
    values
        .iter()
        .zip(prop.measure())
        .map(|(v, m)| m * v * v)
        .sum::<f64>()
        .sqrt()
}

/// Least-squares slope and intercept of ln(y) against t.
fn log_linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for &(t, y) in pts {
        let ly = y.ln();
        st += t;
        sy += ly;
        stt += t * t;
        sty += t * ly;
    }
    let slope = (n * sty - st * sy) / (n * stt - st * st);
    let intercept = (sy - slope * st) / n;
    (slope, intercept)
}

/// Forward scattering data of a solved trajectory. The backward data is
/// obtained by running this on the trajectory of the reflected initial pair
/// and applying [`reflect_spectral`].
pub fn asymptotic_data(
    traj: &TrajectorySolution,
    prop: &Propagator,
    nl: &Nonlinearity,
) -> Result<ScatteringData> {
    let nodes = traj.grid().nodes();
    let last = nodes.len() - 1;
    let fhat = forcing_spectral(traj.states(), prop, nl)?;
    let sg = fhat[0].grid().clone();

    // Kernel centered at t = 0: the pair becomes (-W(s)f, Wdot(s)f), which is
    // exactly the integrand of the scattering correction.
    let (du, dut) = integrate_panels(nodes, &fhat, prop.omegas(), 0, last, 0.0);
    let u0 = traj.states()[0]
        .u
        .add_scaled(&SpectralProfile::from_values(&sg, du)?, 1.0)?;
    let u1 = traj.states()[0]
        .ut
        .add_scaled(&SpectralProfile::from_values(&sg, dut)?, 1.0)?;

    // G(-s) is an energy isometry, so the integrand's energy norm is just
    // ||Fhat(s)||_{L^2(measure)}; fit its decay over the outer quarter of
    // the tail nodes.
    let q: Vec<(f64, f64)> = nodes
        .iter()
        .zip(&fhat)
        .map(|(&t, f)| (t, energy_norm(prop, f.values())))
        .collect();
    let q_cut = q[last].1;
    let t_cut = nodes[last];
    let (decay_rate, truncation_bound) = if q_cut == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let fit_from = t_cut - 0.25 * (t_cut - traj.grid().split());
        let pts: Vec<(f64, f64)> =
            q.iter().copied().filter(|&(t, y)| t >= fit_from && y > 0.0).collect();
        if pts.len() < 3 {
            (f64::NAN, f64::INFINITY)
        } else {
            let (slope, _) = log_linear_fit(&pts);
            let rate = -slope;
            if rate > 0.0 {
                (rate, q_cut / rate)
            } else {
                (rate, f64::INFINITY)
            }
        }
    };

    Ok(ScatteringData {
        state: SpectralState { u: u0, ut: u1 },
        t_cut,
        decay_rate,
        truncation_bound,
    })
}

/// Distance between two scattering states in the energy norm; used to check
/// that extending the horizon moves the data by no more than the reported
/// truncation bound.
pub fn scattering_distance(prop: &Propagator, a: &ScatteringData, b: &ScatteringData) -> f64 {
    let du: Vec<f64> = a
        .state
        .u
        .values()
        .iter()
        .zip(b.state.u.values())
        .map(|(x, y)| x - y)
        .collect();
    let dut: Vec<f64> = a
        .state
        .ut
        .values()
        .iter()
        .zip(b.state.ut.values())
        .map(|(x, y)| x - y)
        .collect();
    let omegas = prop.omegas();
    let e2: f64 = prop
        .measure()
        .iter()
        .enumerate()
        .map(|(j, m)| m * (omegas[j] * omegas[j] * du[j] * du[j] + dut[j] * dut[j]))
        .sum();
    e2.sqrt()
}

/// One time sample of the scattering defect, computed both ways.
#[derive(Debug, Clone, Copy)]
pub struct DefectSample {
    pub t: f64,
    /// ||u(t) - (Wdot(t) u0+ + W(t) u1+)||_{(b+1, d)}.
    pub direct: f64,
    /// ||integral_t^{t_cut} W(t-s) F(u(s)) ds||_{(b+1, d)}.
    pub tail: f64,
}

/// Defect of the trajectory against the free evolution of the scattering
/// data, at every tail node at or beyond t0. The two columns agree up to the
/// solver tolerance when the trajectory actually solves the equation.
pub fn scattering_defects(
    traj: &TrajectorySolution,
    prop: &Propagator,
    scat: &ScatteringData,
    nl: &Nonlinearity,
    ps: &ParameterSet,
) -> Result<Vec<DefectSample>> {
    let e = LorentzExponents::new(ps.b() + 1.0, ps.d())?;
    let nodes = traj.grid().nodes();
    let last = nodes.len() - 1;
    let fhat = forcing_spectral(traj.states(), prop, nl)?;
    let sg = fhat[0].grid().clone();
    let mut out = Vec::new();
    for (k, &t) in nodes.iter().enumerate() {
        if t < ps.t0() {
            continue;
        }
        let free = prop.flow_spectral(t, &scat.state);
        let diff = traj.states()[k].u.sub(&free.u)?;
        let direct = lorentz_norm(&prop.transform().inverse(&diff)?, e)?;

        let (tu, _) = integrate_panels(nodes, &fhat, prop.omegas(), k, last, t);
        let tail_profile = SpectralProfile::from_values(&sg, tu)?;
        let tail = lorentz_norm(&prop.transform().inverse(&tail_profile)?, e)?;
        out.push(DefectSample { t, direct, tail });
    }
    Ok(out)
}

/// Exponential decay fit of positive samples in a time window.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    /// d/dt of ln(defect); negative for decay.
    pub slope: f64,
    pub intercept: f64,
    pub samples: usize,
    /// True when the window held samples but all sat at or below the floor;
    /// the quantity has decayed past measurability, which counts as decay.
    pub floored: bool,
}

pub fn decay_rate_fit(samples: &[(f64, f64)], window: (f64, f64), floor: f64) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(Error::ConstraintViolation(format!(
            "decay window [{lo}, {hi}] is empty"
        )));
    }
    let in_window: Vec<(f64, f64)> =
        samples.iter().copied().filter(|&(t, _)| t >= lo && t <= hi).collect();
    if in_window.is_empty() {
        return Err(Error::ConstraintViolation(format!(
            "no samples in the decay window [{lo}, {hi}]"
        )));
    }
    let usable: Vec<(f64, f64)> =
        in_window.iter().copied().filter(|&(_, y)| y > floor).collect();
    if usable.len() < 5 {
        if usable.len() < in_window.len() {
            return Ok(DecayFit {
                slope: f64::NEG_INFINITY,
                intercept: f64::NEG_INFINITY,
                samples: usable.len(),
                floored: true,
            });
        }
        return Err(Error::ConstraintViolation(format!(
            "only {} usable samples in the decay window; need 5",
            usable.len()
        )));
    }
    let (slope, intercept) = log_linear_fit(&usable);
    Ok(DecayFit { slope, intercept, samples: usable.len(), floored: false })
}

/// (t, e^{rate t} defect): flat or decreasing when the defect is o(e^{-rate t}).
pub fn weighted_defect_trace(samples: &[(f64, f64)], rate: f64) -> Vec<(f64, f64)> {
    samples.iter().map(|&(t, y)| (t, (rate * t).exp() * y)).collect()
}

/// Two solves from nearby data, with their weighted separation traces.
#[derive(Debug)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    /// e^{(alpha+h) t} ||u_a(t) - u_b(t)||_{(b+1, d)} at tail nodes.
    pub nonlinear_trace: Vec<f64>,
    /// Same weight on the difference of the free evolutions.
    pub linear_trace: Vec<f64>,
    /// sup nonlinear / sup linear; the contraction bound predicts at most
    /// 1/(1 - L).
    pub sup_ratio: f64,
    /// E-norm of the data difference, the stability input size.
    pub data_distance: f64,
}

pub fn stability_experiment(
    prop: &Propagator,
    data_a: &WaveState,
    data_b: &WaveState,
    nl: &Nonlinearity,
    ps: &ParameterSet,
    grid: &TimeGrid,
    opts: &SolveOptions,
) -> Result<(StabilityReport, ContractionDiagnostics, ContractionDiagnostics)> {
    let (traj_a, diag_a) = solve_global(prop, data_a, nl, ps, grid, opts)?;
    let (traj_b, diag_b) = solve_global(prop, data_b, nl, ps, grid, opts)?;
    let e = LorentzExponents::new(ps.b() + 1.0, ps.d())?;
    let h = ps.h();
    let w = ps.alpha() + h;

    let sa = prop.to_spectral(data_a)?;
    let sb = prop.to_spectral(data_b)?;

    let mut times = Vec::new();
    let mut nonlinear_trace = Vec::new();
    let mut linear_trace = Vec::new();
    let mut lin_samples = Vec::new();
    for (k, &t) in grid.nodes().iter().enumerate() {
        if t < ps.t0() {
            if t > 0.0 {
                let la = prop.flow_spectral(t, &sa);
                let lb = prop.flow_spectral(t, &sb);
                let d = la.u.sub(&lb.u)?;
                lin_samples.push((t, lorentz_norm(&prop.transform().inverse(&d)?, e)?));
            }
            continue;
        }
        let dn = traj_a.states()[k].u.sub(&traj_b.states()[k].u)?;
        let nl_norm = lorentz_norm(&prop.transform().inverse(&dn)?, e)?;
        let la = prop.flow_spectral(t, &sa);
        let lb = prop.flow_spectral(t, &sb);
        let dl = la.u.sub(&lb.u)?;
        let l_norm = lorentz_norm(&prop.transform().inverse(&dl)?, e)?;
        lin_samples.push((t, l_norm));
        times.push(t);
        nonlinear_trace.push((w * t).exp() * nl_norm);
        linear_trace.push((w * t).exp() * l_norm);
    }
    let sup_nl = nonlinear_trace.iter().copied().fold(0.0f64, f64::max);
    let sup_l = linear_trace.iter().copied().fold(0.0f64, f64::max);
    let sup_ratio = if sup_l == 0.0 {
        if sup_nl == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        sup_nl / sup_l
    };
    let data_distance = weighted_norm(&lin_samples, ps, h).total;

    Ok((
        StabilityReport { times, nonlinear_trace, linear_trace, sup_ratio, data_distance },
        diag_a,
        diag_b,
    ))
}
