//! Harmonic motion of the source and the field trace it produces at the sensor.

use std::f64::consts::PI;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::geometry::{
    field_from_form_factor, CouplingHypothesis, FormFactorProfile, SourceGeometry,
};

/// Where t = 0 sits in the vibration cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseOrigin {
    /// d(0) = d₀ + 2A.
    #[default]
    MaxDistanceAtZero,
}

/// Sign applied to `A ω sin(ω t)`.
///
/// `AsWritten` is the conventional `v(t) = +A ω sin(ω t)`, which is minus the
/// time derivative of `d(t)`. The physical sign of the coupling cannot be
/// resolved by a single experiment, so limits must not depend on this choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VelocityConvention {
    #[default]
    AsWritten,
    Reversed,
}

impl VelocityConvention {
    fn sign(self) -> f64 {
        match self {
            VelocityConvention::AsWritten => 1.0,
            VelocityConvention::Reversed => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibrationModel {
    /// Closest approach, m.
    pub d0: f64,
    /// Vibration amplitude, m.
    pub amplitude: f64,
    /// Angular frequency, rad/s.
    pub omega: f64,
    pub origin: PhaseOrigin,
    pub velocity_convention: VelocityConvention,
}

impl VibrationModel {
    pub fn new(d0: f64, amplitude: f64, omega: f64) -> Result<Self> {
        let m = VibrationModel {
            d0,
            amplitude,
            omega,
            origin: PhaseOrigin::MaxDistanceAtZero,
            velocity_convention: VelocityConvention::AsWritten,
        };
        m.validate()?;
        Ok(m)
    }

    /// d₀ = 2.0 µm, A = 165.2 nm, f = 74.452 kHz.
    pub fn nominal() -> Self {
        Self::new(2.0e-6, 165.2e-9, 2.0 * PI * 74.452e3).expect("nominal vibration is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return Err(Error::domain(format!(
                "d0 must be positive, got {}",
                self.d0
            )));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::domain(format!(
                "amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::domain(format!(
                "angular frequency must be positive, got {}",
                self.omega
            )));
        }
        Ok(())
    }

    pub fn with_velocity_convention(mut self, convention: VelocityConvention) -> Self {
        self.velocity_convention = convention;
        self
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn peak_speed(&self) -> f64 {
        self.amplitude * self.omega
    }

    pub fn distance_range(&self) -> (f64, f64) {
        (self.d0, self.d0 + 2.0 * self.amplitude)
    }

    pub fn distance_at(&self, t: f64) -> f64 {
        let d = self.d0 + self.amplitude * (1.0 + (self.omega * t).cos());
        // Keep rounding from leaving the stroke.
        d.clamp(self.d0, self.d0 + 2.0 * self.amplitude)
    }

    pub fn velocity_at(&self, t: f64) -> f64 {
        self.velocity_convention.sign() * self.amplitude * self.omega * (self.omega * t).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceParity {
    /// Depends on the source position only (e.g. a diamagnetic stray field).
    PositionEven,
    /// Proportional to the source velocity.
    VelocityOdd,
    Custom,
}

/// Sampled field along the NV axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrace {
    times: Vec<f64>,
    values: Vec<f64>,
    pub parity: TraceParity,
}

impl FieldTrace {
    pub fn new(times: Vec<f64>, values: Vec<f64>, parity: TraceParity) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::domain("trace times and values differ in length"));
        }
        if times.len() < 2 {
            return Err(Error::domain("trace needs at least two samples"));
        }
        if !times.windows(2).all(|w| w[1] > w[0]) || !times.iter().all(|t| t.is_finite()) {
            return Err(Error::domain(
                "trace times must be finite and strictly increasing",
            ));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::domain("trace values must be finite"));
        }
        Ok(FieldTrace {
            times,
            values,
            parity,
        })
    }

    /// Samples `field` on `n` uniformly spaced points spanning `[start, end]`.
    pub fn sample<F>(
        start: f64,
        end: f64,
        n: usize,
        parity: TraceParity,
        mut field: F,
    ) -> Result<Self>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let times = uniform_grid(start, end, n)?;
        let values = times
            .iter()
            .map(|&t| field(t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(times, values, parity)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn uniform_grid(start: f64, end: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::domain("need at least two samples"));
    }
    if !(start.is_finite() && end.is_finite() && end > start) {
        return Err(Error::domain(format!("invalid window [{start}, {end}]")));
    }
    let step = (end - start) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                end
            } else {
                start + step * i as f64
            }
        })
        .collect())
}

/// Effective field along the NV axis over `window` as the source vibrates.
pub fn beff_trace(
    hypothesis: &CouplingHypothesis,
    geometry: &SourceGeometry,
    model: &VibrationModel,
    theta: f64,
    window: (f64, f64),
    n_samples: usize,
    constants: &PhysicalConstants,
    quad_tol: f64,
) -> Result<FieldTrace> {
    model.validate()?;
    let (d_min, d_max) = model.distance_range();
    let profile =
        FormFactorProfile::over_range(hypothesis.lambda, geometry, d_min, d_max, quad_tol)?;
    FieldTrace::sample(
        window.0,
        window.1,
        n_samples,
        TraceParity::VelocityOdd,
        |t| {
            let f = profile.eval(model.distance_at(t))?;
            Ok(field_from_form_factor(
                hypothesis.g_product,
                f,
                model.velocity_at(t),
                theta,
                constants,
            ))
        },
    )
}
