//! Nucleon source geometry and the exotic-interaction field it produces.
//!
//! The source is a spherical lens of radius `R` whose lowest (curved) point
//! sits a distance `d` above the sensor, clipped at height `d + thickness`.
//! With `thickness == R` and the sensor on the symmetry axis the volume
//! integral of the screened kernel has a closed form ([`f_closed_form`]);
//! every other configuration goes through [`f_quadrature`].

use std::f64::consts::PI;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Integral, Tolerance};

/// Default relative tolerance for volume quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceGeometry {
    /// Sphere radius, m.
    pub radius: f64,
    /// Lens height measured from its lowest point, m. Equal to `radius` for
    /// the half-sphere.
    pub thickness: f64,
    /// Nucleons per m³.
    pub number_density: f64,
    /// Sensor displacement from the symmetry axis, m.
    pub lateral_offset: [f64; 2],
}

impl SourceGeometry {
    pub fn new(
        radius: f64,
        thickness: f64,
        number_density: f64,
        lateral_offset: [f64; 2],
    ) -> Result<Self> {
        let g = SourceGeometry {
            radius,
            thickness,
            number_density,
            lateral_offset,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn half_sphere(radius: f64, number_density: f64) -> Result<Self> {
        Self::new(radius, radius, number_density, [0.0, 0.0])
    }

    /// Fused-silica half-sphere of 500 µm diameter.
    pub fn nominal() -> Self {
        Self::half_sphere(250e-6, 1.33e30).expect("nominal geometry is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::domain(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        // Thicker than a hemisphere is allowed up to the full ball.
        if !(self.thickness > 0.0 && self.thickness <= 2.0 * self.radius) {
            return Err(Error::domain(format!(
                "thickness must lie in (0, 2R], got {} with R = {}",
                self.thickness, self.radius
            )));
        }
        if !(self.number_density.is_finite() && self.number_density >= 0.0) {
            return Err(Error::domain("number density must be non-negative"));
        }
        if !self.lateral_offset.iter().all(|v| v.is_finite()) {
            return Err(Error::domain("lateral offset must be finite"));
        }
        Ok(())
    }

    pub fn offset_distance(&self) -> f64 {
        self.lateral_offset[0].hypot(self.lateral_offset[1])
    }

    /// Whether [`f_closed_form`] applies.
    pub fn is_half_sphere_on_axis(&self) -> bool {
        self.thickness == self.radius && self.offset_distance() == 0.0
    }

    /// Radius of the horizontal lens cross-section at height `z` above the
    /// sensor, for a lens whose lowest point is at height `d`.
    fn cross_section_radius(&self, z: f64, d: f64) -> f64 {
        let dz = z - d - self.radius;
        (self.radius * self.radius - dz * dz).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingHypothesis {
    /// Force range, m.
    pub lambda: f64,
    /// Dimensionless coupling product g_A^e g_V^N.
    pub g_product: f64,
}

impl CouplingHypothesis {
    pub fn new(lambda: f64, g_product: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::domain(format!(
                "force range must be positive, got {lambda}"
            )));
        }
        if !g_product.is_finite() {
            return Err(Error::domain("coupling must be finite"));
        }
        Ok(CouplingHypothesis { lambda, g_product })
    }

    pub fn from_boson_mass(
        mass_ev: f64,
        g_product: f64,
        constants: &PhysicalConstants,
    ) -> Result<Self> {
        if !(mass_ev.is_finite() && mass_ev > 0.0) {
            return Err(Error::domain(format!(
                "boson mass must be positive, got {mass_ev}"
            )));
        }
        Self::new(constants.hbar_c / mass_ev, g_product)
    }

    /// m_b c² in eV.
    pub fn boson_mass_ev(&self, constants: &PhysicalConstants) -> f64 {
        constants.hbar_c / self.lambda
    }
}

/// Screened Coulomb kernel `exp(-r/λ)/r` in m⁻¹.
pub fn point_kernel(r: f64, lambda: f64) -> Result<f64> {
    if !(r > 0.0) || !(lambda > 0.0) {
        return Err(Error::domain(format!(
            "kernel needs r > 0 and lambda > 0, got r = {r}, lambda = {lambda}"
        )));
    }
    Ok((-r / lambda).exp() / r)
}

fn check_distance(d: f64) -> Result<()> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::domain(format!(
            "source distance must be positive, got {d}"
        )));
    }
    Ok(())
}

/// Closed-form volume integral `ρ ∫ exp(-r/λ)/r dV` for the on-axis half-sphere.
pub fn f_closed_form(lambda: f64, geometry: &SourceGeometry, d: f64) -> Result<f64> {
    check_distance(d)?;
    geometry.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::domain(format!(
            "force range must be positive, got {lambda}"
        )));
    }
    if !geometry.is_half_sphere_on_axis() {
        return Err(Error::precondition(
            "closed form requires an on-axis half-sphere (thickness = radius, zero offset); use f_quadrature",
        ));
    }
    let r = geometry.radius;
    let near = d + r;
    let rim = (r * r + near * near).sqrt();
    let bracket = -(-near / lambda).exp()
        + (-d / lambda).exp()
        + (rim + lambda) / near * (-rim / lambda).exp()
        - (d + lambda) / near * (-d / lambda).exp();
    Ok(2.0 * PI * geometry.number_density * lambda * lambda * bracket)
}

/// Volume integral of the screened kernel over the lens by iterated adaptive
/// Gauss–Kronrod quadrature.
///
/// On axis the azimuth is integrated analytically, leaving a (height × radius)
/// double integral; off axis the azimuth is integrated numerically as well.
/// The returned error is the outer integration's error estimate.
pub fn f_quadrature(lambda: f64, geometry: &SourceGeometry, d: f64, tol: f64) -> Result<Integral> {
    check_distance(d)?;
    geometry.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::domain(format!(
            "force range must be positive, got {lambda}"
        )));
    }
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(Error::domain(format!(
            "tolerance must lie in (0, 1e-2], got {tol}"
        )));
    }
    if geometry.number_density == 0.0 {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }

    let offset = geometry.offset_distance();
    let z_range = (d, d + geometry.thickness);
    // The kernel is evaluated relative to its value at the nearest point of
    // the lens, so deep-tail contributions underflow to zero rather than to
    // denormals. The absolute floors are tiny fractions of the integral's
    // natural size 2π·min(λ, R)², spread over the measure of the outer
    // dimensions.
    let near = (offset.hypot(d + geometry.radius) - geometry.radius).max(d);
    let scale = 2.0 * PI * lambda.min(geometry.radius).powi(2);
    let outer_tol = Tolerance::relative(tol).with_absolute(1e-3 * tol * scale);
    let mid_tol =
        Tolerance::relative(tol * 0.1).with_absolute(1e-4 * tol * scale / geometry.thickness);
    let inner_tol = Tolerance::relative(tol * 0.01).with_absolute(
        1e-5 * tol * scale / (geometry.thickness * geometry.radius * geometry.radius),
    );
    let kernel = |r: f64| (-(r - near) / lambda).exp() / r;

    let mut evaluations = 0usize;
    let outer = if offset == 0.0 {
        integrate(
            |z| {
                let a = geometry.cross_section_radius(z, d);
                let ring = integrate(|rho| Ok(rho * kernel(rho.hypot(z))), 0.0, a, mid_tol)?;
                evaluations += ring.evaluations;
                Ok(2.0 * PI * ring.value)
            },
            z_range.0,
            z_range.1,
            outer_tol,
        )?
    } else {
        integrate(
            |z| {
                let a = geometry.cross_section_radius(z, d);
                let slab = integrate(
                    |rho| {
                        let base = rho * rho + offset * offset + z * z;
                        let cross = 2.0 * rho * offset;
                        // Mirror symmetry in the azimuth: integrate [0, π] twice.
                        let arc = integrate(
                            |psi| Ok(kernel((base - cross * psi.cos()).max(0.0).sqrt())),
                            0.0,
                            PI,
                            inner_tol,
                        )?;
                        evaluations += arc.evaluations;
                        Ok(2.0 * rho * arc.value)
                    },
                    0.0,
                    a,
                    mid_tol,
                )?;
                Ok(slab.value)
            },
            z_range.0,
            z_range.1,
            outer_tol,
        )?
    };

    let weight = geometry.number_density * (-near / lambda).exp();
    Ok(Integral {
        value: weight * outer.value,
        error: weight * outer.error,
        evaluations: evaluations + outer.evaluations,
    })
}

/// `f(λ, geometry, d)` by the closed form when it applies, by quadrature otherwise.
pub fn form_factor(lambda: f64, geometry: &SourceGeometry, d: f64, tol: f64) -> Result<f64> {
    if geometry.is_half_sphere_on_axis() {
        f_closed_form(lambda, geometry, d)
    } else {
        Ok(f_quadrature(lambda, geometry, d, tol)?.value)
    }
}

/// Field along the NV axis in tesla for a source at distance `d` moving with
/// signed speed `v` at angle `theta` to the axis.
pub fn effective_field(
    hypothesis: &CouplingHypothesis,
    geometry: &SourceGeometry,
    d: f64,
    v: f64,
    theta: f64,
    constants: &PhysicalConstants,
) -> Result<f64> {
    let f = form_factor(hypothesis.lambda, geometry, d, DEFAULT_QUAD_TOL)?;
    Ok(field_from_form_factor(
        hypothesis.g_product,
        f,
        v,
        theta,
        constants,
    ))
}

pub(crate) fn field_from_form_factor(
    g_product: f64,
    f: f64,
    v: f64,
    theta: f64,
    constants: &PhysicalConstants,
) -> f64 {
    g_product / (2.0 * PI * constants.gamma_e) * f * v * theta.cos()
}

/// `f(d)` over a fixed distance interval, for repeated evaluation along a
/// vibration stroke.
///
/// Closed-form geometries are evaluated directly. Otherwise `f` is sampled by
/// quadrature at Chebyshev–Lobatto nodes and interpolated; the node count is
/// doubled until the trailing Chebyshev coefficients fall to the quadrature
/// noise floor.
#[derive(Debug, Clone)]
pub enum FormFactorProfile {
    Closed {
        lambda: f64,
        geometry: SourceGeometry,
    },
    Chebyshev {
        d_min: f64,
        d_max: f64,
        coeffs: Vec<f64>,
    },
}

const MAX_CHEBYSHEV_DEGREE: usize = 128;

impl FormFactorProfile {
    pub fn over_range(
        lambda: f64,
        geometry: &SourceGeometry,
        d_min: f64,
        d_max: f64,
        tol: f64,
    ) -> Result<Self> {
        check_distance(d_min)?;
        if !(d_max >= d_min && d_max.is_finite()) {
            return Err(Error::domain("distance range must be ordered and finite"));
        }
        if geometry.is_half_sphere_on_axis() {
            // Validate eagerly so `eval` only fails on range errors.
            f_closed_form(lambda, geometry, d_min)?;
            return Ok(FormFactorProfile::Closed {
                lambda,
                geometry: *geometry,
            });
        }
        if d_max == d_min {
            let v = f_quadrature(lambda, geometry, d_min, tol)?.value;
            return Ok(FormFactorProfile::Chebyshev {
                d_min,
                d_max,
                coeffs: vec![v],
            });
        }

        let mid = 0.5 * (d_min + d_max);
        let half = 0.5 * (d_max - d_min);
        let sample = |k: usize, n: usize| -> Result<f64> {
            let x = (PI * k as f64 / n as f64).cos();
            Ok(f_quadrature(lambda, geometry, mid + half * x, tol)?.value)
        };

        let mut n = 8;
        let mut values: Vec<f64> = (0..=n).map(|k| sample(k, n)).collect::<Result<_>>()?;
        loop {
            let coeffs = lobatto_coefficients(&values);
            let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            let tail = coeffs[n].abs().max(coeffs[n - 1].abs());
            if tail <= 10.0 * tol * scale || scale == 0.0 {
                return Ok(FormFactorProfile::Chebyshev {
                    d_min,
                    d_max,
                    coeffs,
                });
            }
            if n >= MAX_CHEBYSHEV_DEGREE {
                return Err(Error::NonConvergence {
                    estimate: coeffs[0],
                    error_bound: tail,
                    context: format!("Chebyshev profile of degree {n} over [{d_min:e}, {d_max:e}]"),
                });
            }
            // Lobatto nodes of degree n are the even nodes of degree 2n.
            let mut refined = Vec::with_capacity(2 * n + 1);
            for k in 0..=2 * n {
                if k % 2 == 0 {
                    refined.push(values[k / 2]);
                } else {
                    refined.push(sample(k, 2 * n)?);
                }
            }
            values = refined;
            n *= 2;
        }
    }

    pub fn eval(&self, d: f64) -> Result<f64> {
        match self {
            FormFactorProfile::Closed { lambda, geometry } => f_closed_form(*lambda, geometry, d),
            FormFactorProfile::Chebyshev {
                d_min,
                d_max,
                coeffs,
            } => {
                let span = d_max - d_min;
                let slack = 1e-9 * span.max(d_min.abs());
                if d < d_min - slack || d > d_max + slack {
                    return Err(Error::domain(format!(
                        "distance {d:e} outside interpolation range [{d_min:e}, {d_max:e}]"
                    )));
                }
                if coeffs.len() == 1 {
                    return Ok(coeffs[0]);
                }
                let x = ((2.0 * d - d_min - d_max) / span).clamp(-1.0, 1.0);
                Ok(clenshaw(coeffs, x))
            }
        }
    }
}

/// Chebyshev coefficients from samples at `x_k = cos(πk/n)`, with the first
/// and last coefficients already halved.
fn lobatto_coefficients(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    let nf = n as f64;
    (0..=n)
        .map(|j| {
            let mut s = 0.0;
            for (k, v) in values.iter().enumerate() {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                s += w * v * (PI * (j * k) as f64 / nf).cos();
            }
            let c = 2.0 / nf * s;
            if j == 0 || j == n {
                0.5 * c
            } else {
                c
            }
        })
        .collect()
}

fn clenshaw(coeffs: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2 + coeffs[0]
}
