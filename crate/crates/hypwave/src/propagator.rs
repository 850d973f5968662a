//! Klein–Gordon propagators as spectral multipliers.
//!
//! With D = sqrt(-Laplacian + c) and c >= -rho^2, the generalized frequency at
//! spectral point lambda is
//!     omega(lambda) = sqrt(lambda^2 + rho^2 + c),
//! nonnegative by spectral positivity (omega = lambda exactly in the shifted
//! case c = -rho^2). The wave group acts diagonally:
//!     W(t) = sin(t D)/D   -> t * sinc(t omega),
//!     Wdot(t) = cos(t D)  -> cos(t omega),
//!     Wdot(t)/D           -> cos(t omega)/omega (singular at omega = 0).
//! All applications stay on the spectral side; physical wrappers round-trip
//! through the calibrated transform. The conserved spectral energy is
//!     E = ||omega uhat||^2 + ||uhat_t||^2
//! with respect to the inversion measure.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::RadialProfile;
use crate::special::sinc;
use crate::transform::{SpectralProfile, SphericalTransform};

/// Mass shift c in D^2 = -Laplacian + c, validated against -rho^2.
#[derive(Debug, Clone, Copy)]
pub struct MassParameter(f64);

impl MassParameter {
    pub fn new(c: f64, rho: f64) -> Result<Self> {
        let floor = -rho * rho;
        if !c.is_finite() {
            return Err(Error::NotFinite { name: "c", value: c });
        }
        if c < floor {
            return Err(Error::SpectralPositivity { c, floor });
        }
        Ok(Self(c))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// omega(lambda) = sqrt(lambda^2 + rho^2 + c) for a validated mass shift.
pub fn dispersion_relation(lambda: f64, c: f64, rho: f64) -> Result<f64> {
    MassParameter::new(c, rho)?;
    let sq = lambda * lambda + rho * rho + c;
    // Clamp tiny negative rounding in the shifted case.
    Ok(sq.max(0.0).sqrt())
}

/// Position/velocity pair on the physical side.
#[derive(Debug, Clone)]
pub struct WaveState {
    pub u: RadialProfile,
    pub ut: RadialProfile,
}

/// Position/velocity pair on the spectral side.
#[derive(Debug, Clone)]
pub struct SpectralState {
    pub u: SpectralProfile,
    pub ut: SpectralProfile,
}

/// Diagonalized wave group for one (transform, mass) pair.
pub struct Propagator {
    transform: Arc<SphericalTransform>,
    mass: MassParameter,
    omega: Vec<f64>,
    /// Inversion measure weights (calibration folded in).
    measure: Vec<f64>,
}

impl Propagator {
    /// Requires a calibrated transform (the inverse direction is essential).
    pub fn new(transform: &Arc<SphericalTransform>, c: f64) -> Result<Self> {
        let rho = transform.radial_grid().space().rho();
        let mass = MassParameter::new(c, rho)?;
        let omega = transform
            .spectral_grid()
            .nodes()
            .iter()
            .map(|&l| dispersion_relation(l, c, rho))
            .collect::<Result<_>>()?;
        let measure = transform.spectral_measure_weights()?;
        Ok(Self { transform: Arc::clone(transform), mass, omega, measure })
    }

    pub fn transform(&self) -> &Arc<SphericalTransform> {
        &self.transform
    }

    pub fn mass(&self) -> f64 {
        self.mass.value()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omega
    }

    pub fn min_omega(&self) -> f64 {
        self.omega.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Calibrated spectral measure weights, aligned with [`Self::omegas`].
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// W(t) ghat: multiplier t * sinc(t omega) (equals t at omega = 0).
    pub fn mult_w(&self, t: f64, g: &SpectralProfile) -> SpectralProfile {
        let m: Vec<f64> = self.omega.iter().map(|&w| t * sinc(t * w)).collect();
        g.mul_values(&m)
    }

    /// Wdot(t) ghat: multiplier cos(t omega).
    pub fn mult_wdot(&self, t: f64, g: &SpectralProfile) -> SpectralProfile {
        let m: Vec<f64> = self.omega.iter().map(|&w| (t * w).cos()).collect();
        g.mul_values(&m)
    }

    /// (Wdot(t)/D) ghat: multiplier cos(t omega)/omega. Errors if the profile
    /// carries mass at a node where omega vanishes.
    pub fn mult_wdot_over_d(&self, t: f64, g: &SpectralProfile) -> Result<SpectralProfile> {
        for (w, v) in self.omega.iter().zip(g.values()) {
            if *w < 1e-12 && *v != 0.0 {
                return Err(Error::SingularMultiplier);
            }
        }
        let m: Vec<f64> = self
            .omega
            .iter()
            .map(|&w| if w < 1e-12 { 0.0 } else { (t * w).cos() / w })
            .collect();
        Ok(g.mul_values(&m))
    }

    /// Free evolution of a spectral state by time t (exact multiplier algebra):
    /// u(t) = cos(t w) u0 + t sinc(t w) u1, u_t(t) = -w sin(t w) u0 + cos(t w) u1.
    pub fn flow_spectral(&self, t: f64, state: &SpectralState) -> SpectralState {
        let n = self.omega.len();
        let mut u = Vec::with_capacity(n);
        let mut ut = Vec::with_capacity(n);
        for j in 0..n {
            let w = self.omega[j];
            let (u0, u1) = (state.u.values()[j], state.ut.values()[j]);
            let cwt = (t * w).cos();
            let wt = t * sinc(t * w);
            u.push(cwt * u0 + wt * u1);
            ut.push(-w * (t * w).sin() * u0 + cwt * u1);
        }
        SpectralState {
            u: SpectralProfile::from_values(state.u.grid(), u).expect("same grid"),
            ut: SpectralProfile::from_values(state.ut.grid(), ut).expect("same grid"),
        }
    }

    /// Conserved spectral energy ||omega uhat||^2 + ||uhat_t||^2.
    pub fn spectral_energy(&self, state: &SpectralState) -> f64 {
        let mut e = 0.0;
        for j in 0..self.omega.len() {
            let w = self.omega[j];
            let (u, ut) = (state.u.values()[j], state.ut.values()[j]);
            e += self.measure[j] * (w * w * u * u + ut * ut);
        }
        e
    }

    pub fn to_spectral(&self, state: &WaveState) -> Result<SpectralState> {
        Ok(SpectralState {
            u: self.transform.forward(&state.u)?,
            ut: self.transform.forward(&state.ut)?,
        })
    }

    pub fn to_physical(&self, state: &SpectralState) -> Result<WaveState> {
        Ok(WaveState {
            u: self.transform.inverse(&state.u)?,
            ut: self.transform.inverse(&state.ut)?,
        })
    }

    /// Physical-side W(t) g.
    pub fn apply_w(&self, t: f64, g: &RadialProfile) -> Result<RadialProfile> {
        let ghat = self.transform.forward(g)?;
        self.transform.inverse(&self.mult_w(t, &ghat))
    }

    /// Physical-side Wdot(t) g.
    pub fn apply_wdot(&self, t: f64, g: &RadialProfile) -> Result<RadialProfile> {
        let ghat = self.transform.forward(g)?;
        self.transform.inverse(&self.mult_wdot(t, &ghat))
    }

    /// Physical-side (Wdot(t)/D) g.
    pub fn apply_wdot_over_d(&self, t: f64, g: &RadialProfile) -> Result<RadialProfile> {
        let ghat = self.transform.forward(g)?;
        self.transform.inverse(&self.mult_wdot_over_d(t, &ghat)?)
    }

    /// Physical-side free evolution of a data pair.
    pub fn linear_flow(&self, t: f64, data: &WaveState) -> Result<WaveState> {
        let s = self.to_spectral(data)?;
        self.to_physical(&self.flow_spectral(t, &s))
    }
}
