//! Radial geometry of real hyperbolic space H^n.
//!
//! Everything is reduced to the geodesic radial coordinate r >= 0 with volume
//! element Omega_{n-1} sinh^{n-1}(r) dr, where Omega_{n-1} = 2 pi^{n/2} / Gamma(n/2)
//! is the Euclidean unit-sphere area. The spectral parameter rho = (n-1)/2 marks
//! the bottom of the L^2 spectrum of -Laplacian, [rho^2, inf).
//!
//! Spherical functions phi_lambda solve
//!     phi'' + (n-1) coth(r) phi' + (lambda^2 + rho^2) phi = 0,  phi(0) = 1,
//! and are implemented in closed form for n = 3,
//!     phi_lambda(r) = sin(lambda r) / (lambda sinh r),
//! and n = 5 (one step of the descent recursion
//! phi^(n+2) ~ (-1/sinh r d/dr) phi^(n)),
//!     phi_lambda(r) = 3 [sin(lambda r) cosh r - lambda cos(lambda r) sinh r]
//!                     / (lambda (1 + lambda^2) sinh^3 r).
//! Other dimensions are rejected where the closed form is required; measures and
//! volumes are dimension-generic.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::special::{composite_gauss_legendre, ln_gamma, sinc, x_over_sinh};

/// Validated dimension n >= 2 of H^n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperbolicSpace {
    n: usize,
}

impl HyperbolicSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(n));
        }
        Ok(Self { n })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// rho = (n-1)/2, the spectral gap parameter.
    pub fn rho(&self) -> f64 {
        (self.n as f64 - 1.0) / 2.0
    }

    /// Volume density at radius r: Omega_{n-1} sinh^{n-1}(r).
    pub fn volume_density(&self, r: f64) -> f64 {
        surface_measure(self.n).unwrap() * r.sinh().powi(self.n as i32 - 1)
    }
}

/// Area of the Euclidean unit sphere S^{n-1}: 2 pi^{n/2} / Gamma(n/2).
pub fn surface_measure(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidDimension(n));
    }
    let half = n as f64 / 2.0;
    Ok(2.0 * std::f64::consts::PI.powf(half) / ln_gamma(half).exp())
}

/// int_0^R sinh^k(r) dr by the stable downward recursion
/// I_k = (sinh^{k-1}(R) cosh(R) - (k-1) I_{k-2}) / k.
fn sinh_power_integral(k: usize, r: f64) -> f64 {
    match k {
        0 => r,
        1 => r.cosh() - 1.0,
        _ => {
            (r.sinh().powi(k as i32 - 1) * r.cosh()
                - (k as f64 - 1.0) * sinh_power_integral(k - 2, r))
                / k as f64
        }
    }
}

/// Volume of the geodesic ball of radius R in H^n.
pub fn ball_volume(n: usize, radius: f64) -> Result<f64> {
    if radius < 0.0 || !radius.is_finite() {
        return Err(Error::NotFinite { name: "radius", value: radius });
    }
    Ok(surface_measure(n)? * sinh_power_integral(n - 1, radius))
}

/// Spherical function phi_lambda(r) on H^n, normalized phi_lambda(0) = 1.
///
/// Defined for lambda >= 0, r >= 0; closed forms for n = 3 and n = 5 only.
/// The n = 5 branch switches to the Taylor series of the radial ODE below
/// r = 3e-3 (accurate for lambda r << 1; fine for the lambda ranges used here).
pub fn spherical_function(n: usize, lambda: f64, r: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidDimension(n));
    }
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::NotFinite { name: "lambda", value: lambda });
    }
    if r < 0.0 || !r.is_finite() {
        return Err(Error::NotFinite { name: "r", value: r });
    }
    match n {
        // sin(lambda r)/(lambda sinh r) = sinc(lambda r) * (r / sinh r), a form
        // with both removable singularities handled inside the scalar helpers.
        3 => Ok(sinc(lambda * r) * x_over_sinh(r)),
        5 => {
            let k = lambda * lambda + 4.0; // lambda^2 + rho^2, rho = 2
            if r < 3e-3 {
                // phi = 1 - K r^2/10 + K(K + 8/3) r^4/280 + O(r^6)
                let r2 = r * r;
                Ok(1.0 - k * r2 / 10.0 + k * (k + 8.0 / 3.0) * r2 * r2 / 280.0)
            } else {
                let sh = r.sinh();
                let num = (lambda * r).sin() * r.cosh() - lambda * (lambda * r).cos() * sh;
                let den = lambda * (1.0 + lambda * lambda) * sh * sh * sh;
                if lambda < 1e-7 {
                    // lambda -> 0 limit of the quotient: (cosh r sinh... ) use
                    // series of num in lambda: num ~ lambda (r cosh r - sinh r) + O(lambda^3)
                    Ok(3.0 * (r * r.cosh() - sh) / ((1.0 + lambda * lambda) * sh * sh * sh))
                } else {
                    Ok(3.0 * num / den)
                }
            }
        }
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

/// Quadrature grid on [0, r_max] carrying the hyperbolic measure.
///
/// `weights[i]` approximates the measure Omega_{n-1} sinh^{n-1}(r) dr near
/// `nodes[i]`, so `sum_i w_i f(r_i)` integrates f over the ball of radius r_max.
#[derive(Debug)]
pub struct RadialGrid {
    space: HyperbolicSpace,
    r_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialGrid {
    /// Composite Gauss–Legendre rule: `panels` uniform panels, `per_panel`
    /// nodes each. Nodes are interior (never 0 or r_max exactly).
    pub fn gauss_legendre(
        space: HyperbolicSpace,
        r_max: f64,
        panels: usize,
        per_panel: usize,
    ) -> Result<Arc<Self>> {
        if r_max <= 0.0 || !r_max.is_finite() {
            return Err(Error::NonPositive { name: "r_max", value: r_max });
        }
        if panels == 0 || per_panel == 0 {
            return Err(Error::GridTooCoarse("empty Gauss-Legendre rule".into()));
        }
        let (nodes, plain) = composite_gauss_legendre(0.0, r_max, panels, per_panel);
        let weights = nodes
            .iter()
            .zip(&plain)
            .map(|(r, w)| w * space.volume_density(*r))
            .collect();
        Ok(Arc::new(Self { space, r_max, nodes, weights }))
    }

    /// Uniform grid including both endpoints, trapezoid weights times the
    /// volume density. Second-order accurate; used by finite-difference tests.
    pub fn uniform(space: HyperbolicSpace, r_max: f64, num_points: usize) -> Result<Arc<Self>> {
        if r_max <= 0.0 || !r_max.is_finite() {
            return Err(Error::NonPositive { name: "r_max", value: r_max });
        }
        if num_points < 3 {
            return Err(Error::GridTooCoarse(format!(
                "uniform grid needs >= 3 points, got {num_points}"
            )));
        }
        let h = r_max / (num_points - 1) as f64;
        let nodes: Vec<f64> = (0..num_points).map(|i| i as f64 * h).collect();
        let weights = nodes
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let trap = if i == 0 || i == num_points - 1 { 0.5 * h } else { h };
                trap * space.volume_density(*r)
            })
            .collect();
        Ok(Arc::new(Self { space, r_max, nodes, weights }))
    }

    pub fn space(&self) -> HyperbolicSpace {
        self.space
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Relative defect of the weight sum against the exact ball volume.
    pub fn quadrature_defect(&self) -> f64 {
        let v = ball_volume(self.space.n, self.r_max).unwrap();
        let s: f64 = self.weights.iter().sum();
        ((s - v) / v).abs()
    }

    fn same_as(&self, other: &Self) -> bool {
        self.space == other.space
            && self.r_max == other.r_max
            && self.nodes.len() == other.nodes.len()
            && self.nodes == other.nodes
    }
}

/// Radial function sampled on a [`RadialGrid`].
#[derive(Debug, Clone)]
pub struct RadialProfile {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes.iter().map(|&r| f(r)).collect();
        Self { grid: Arc::clone(grid), values }
    }

    pub fn from_values(grid: &Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::IncompatibleGrid);
        }
        Ok(Self { grid: Arc::clone(grid), values })
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self { grid: Arc::clone(grid), values: vec![0.0; grid.len()] }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn compatible(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid)
    }

    /// Integral over the ball: sum of measure weights times values.
    pub fn integrate(&self) -> f64 {
        self.values.iter().zip(self.grid.weights()).map(|(v, w)| v * w).sum()
    }

    /// Weighted L^2 inner product against `other`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        if !self.compatible(other) {
            return Err(Error::IncompatibleGrid);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((a, b), w)| a * b * w)
            .sum())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// self + c * other.
    pub fn add_scaled(&self, other: &Self, c: f64) -> Result<Self> {
        if !self.compatible(other) {
            return Err(Error::IncompatibleGrid);
        }
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, -1.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if !self.compatible(other) {
            return Err(Error::IncompatibleGrid);
        }
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }
}

/// Smooth bump supported in [0, radius): exp(1 - 1/(1 - (r/radius)^2)),
/// normalized to 1 at the origin. All derivatives vanish at the support edge,
/// so spectral transforms of this profile decay superalgebraically.
pub fn bump_profile(grid: &Arc<RadialGrid>, radius: f64) -> RadialProfile {
    RadialProfile::from_fn(grid, |r| {
        let x = r / radius;
        if x < 1.0 {
            (1.0 - 1.0 / (1.0 - x * x)).exp()
        } else {
            0.0
        }
    })
}

/// Radial Laplace–Beltrami operator f'' + (n-1) coth(r) f' by second-order
/// finite differences on (possibly nonuniform) interior nodes.
///
/// Endpoint entries of the result are set to 0; callers compare on interior
/// nodes only. A node at r = 0 is always treated as an endpoint.
pub fn apply_radial_laplacian(f: &RadialProfile) -> Result<RadialProfile> {
    let grid = f.grid();
    let n = grid.space().dimension() as f64;
    let r = grid.nodes();
    let v = f.values();
    if r.len() < 5 {
        return Err(Error::GridTooCoarse(format!(
            "laplacian stencil needs >= 5 nodes, got {}",
            r.len()
        )));
    }
    let mut out = vec![0.0; r.len()];
    for i in 1..r.len() - 1 {
        if r[i] <= 0.0 {
            continue;
        }
        let hm = r[i] - r[i - 1];
        let hp = r[i + 1] - r[i];
        let d1 = -hp / (hm * (hm + hp)) * v[i - 1]
            + (hp - hm) / (hm * hp) * v[i]
            + hm / (hp * (hm + hp)) * v[i + 1];
        let d2 = 2.0
            * (v[i - 1] / (hm * (hm + hp)) - v[i] / (hm * hp) + v[i + 1] / (hp * (hm + hp)));
        out[i] = d2 + (n - 1.0) * (1.0 / r[i].tanh()) * d1;
    }
    RadialProfile::from_values(grid, out)
}
