//! From interference data to coupling limits.
//!
//! [`fit_phase`] extracts the anomalous phase, [`transfer_factor`] converts
//! phase to coupling, [`systematic_budget`] propagates the measured
//! uncertainties of the setup by shift-and-recompute, and
//! [`exclusion_limit`]/[`exclusion_curve`] combine everything into confidence
//! bounds on |g_A^e g_V^N| versus force range.

use std::fmt;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::geometry::{CouplingHypothesis, SourceGeometry};
use crate::kinematics::VibrationModel;
use crate::spin::{accumulated_phase, Numerics, SequenceConfig};

/// Fitted anomalous phase with its 1σ statistical uncertainty, rad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEstimate {
    pub phi_central: f64,
    pub sigma_stat: f64,
}

impl PhaseEstimate {
    pub fn new(phi_central: f64, sigma_stat: f64) -> Result<Self> {
        if !phi_central.is_finite() || !(sigma_stat.is_finite() && sigma_stat >= 0.0) {
            return Err(Error::domain(format!(
                "invalid phase estimate {phi_central} ± {sigma_stat}"
            )));
        }
        Ok(PhaseEstimate {
            phi_central,
            sigma_stat,
        })
    }

    /// The measured value, 0.0011 ± 0.0014 rad.
    pub fn measured() -> Self {
        PhaseEstimate {
            phi_central: 0.0011,
            sigma_stat: 0.0014,
        }
    }
}

/// One interference point `I(φ_mw) ± σ_I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDatum {
    pub phi_mw: f64,
    pub interference: f64,
    pub sigma: f64,
}

/// Weighted least-squares fit of `I = −sin(φ_mw) sin(φ)`.
///
/// The model is linear in `s = sin φ`, so the χ² minimum is found in closed
/// form; the uncertainty comes from the χ² curvature in φ at the minimum.
pub fn fit_phase(data: &[PhaseDatum]) -> Result<PhaseEstimate> {
    if data.len() < 3 {
        return Err(Error::domain(format!(
            "need at least 3 points, got {}",
            data.len()
        )));
    }
    for (i, p) in data.iter().enumerate() {
        if !(p.phi_mw.is_finite() && p.interference.is_finite()) {
            return Err(Error::domain(format!("row {i} is not finite")));
        }
        if !(p.sigma.is_finite() && p.sigma > 0.0) {
            return Err(Error::domain(format!(
                "row {i} has non-positive uncertainty {}",
                p.sigma
            )));
        }
    }
    if data.iter().all(|p| p.phi_mw.sin().abs() < 1e-12) {
        return Err(Error::Unidentifiable(
            "every microwave phase is a multiple of π; sin(φ) drops out".into(),
        ));
    }

    let (mut sxx, mut sxy) = (0.0, 0.0);
    for p in data {
        let w = 1.0 / (p.sigma * p.sigma);
        let x = p.phi_mw.sin();
        sxx += w * x * x;
        sxy += w * x * p.interference;
    }
    let s = -sxy / sxx;
    if s.abs() > 1.0 {
        return Err(Error::Degenerate(format!(
            "best-fit sin(φ) = {s:.3} lies outside [-1, 1]"
        )));
    }
    let phi = s.asin();
    // d²χ²/dφ² / 2 = Σ w x² cos²φ; the residual term vanishes at the minimum.
    let curvature = sxx * phi.cos().powi(2);
    PhaseEstimate::new(phi, 1.0 / curvature.sqrt())
}

/// Everything about the apparatus that the phase depends on, apart from the
/// hypothesis itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experiment {
    pub geometry: SourceGeometry,
    pub vibration: VibrationModel,
    /// Angle between source velocity and NV axis, rad.
    pub theta: f64,
    pub sequence: SequenceConfig,
    pub constants: PhysicalConstants,
    pub numerics: Numerics,
}

impl Experiment {
    /// The published setup: half-sphere R = 250 µm, d₀ = 2 µm, A = 165.2 nm,
    /// 74.452 kHz, θ = arccos(1/√3), τ = 6.652 µs.
    pub fn nominal() -> Self {
        Experiment {
            geometry: SourceGeometry::nominal(),
            vibration: VibrationModel::nominal(),
            theta: (1.0 / 3f64.sqrt()).acos(),
            sequence: SequenceConfig::nominal(),
            constants: PhysicalConstants::codata(),
            numerics: Numerics::default(),
        }
    }

    pub fn phase(&self, hypothesis: &CouplingHypothesis) -> Result<f64> {
        Ok(accumulated_phase(
            hypothesis,
            &self.geometry,
            &self.vibration,
            self.theta,
            &self.sequence,
            &self.constants,
            &self.numerics,
        )?
        .phi)
    }
}

/// Accumulated phase magnitude per unit coupling, rad.
///
/// The phase is linear in the coupling, so this is |φ| at g = 1. The sign of
/// φ depends on the velocity and sync conventions and is dropped.
pub fn transfer_factor(lambda: f64, experiment: &Experiment) -> Result<f64> {
    let unit = CouplingHypothesis::new(lambda, 1.0)?;
    Ok(experiment.phase(&unit)?.abs())
}

/// Setup parameters with a measured uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystematicKind {
    /// Angle between velocity and NV axis.
    Angle,
    /// Closest approach d₀.
    MinDistance,
    /// Lens diameter 2R; a half-sphere keeps thickness = R.
    Diameter,
    /// Lens thickness at fixed radius.
    Thickness,
    /// Vibration amplitude.
    Amplitude,
    /// Sensor offset from the lens axis in the x-y plane.
    LateralOffset,
}

impl SystematicKind {
    pub const ALL: [SystematicKind; 6] = [
        SystematicKind::Angle,
        SystematicKind::MinDistance,
        SystematicKind::Diameter,
        SystematicKind::Thickness,
        SystematicKind::Amplitude,
        SystematicKind::LateralOffset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystematicKind::Angle => "angle_theta",
            SystematicKind::MinDistance => "distance_d0",
            SystematicKind::Diameter => "diameter",
            SystematicKind::Thickness => "thickness",
            SystematicKind::Amplitude => "amplitude",
            SystematicKind::LateralOffset => "xy_deviation",
        }
    }

    /// Value of this parameter in `experiment` (SI: rad or m).
    pub fn value_in(self, experiment: &Experiment) -> f64 {
        match self {
            SystematicKind::Angle => experiment.theta,
            SystematicKind::MinDistance => experiment.vibration.d0,
            SystematicKind::Diameter => 2.0 * experiment.geometry.radius,
            SystematicKind::Thickness => experiment.geometry.thickness,
            SystematicKind::Amplitude => experiment.vibration.amplitude,
            SystematicKind::LateralOffset => experiment.geometry.offset_distance(),
        }
    }

    /// Copy of `experiment` with this parameter set to `value`.
    pub fn apply(self, experiment: &Experiment, value: f64) -> Result<Experiment> {
        let mut e = *experiment;
        match self {
            SystematicKind::Angle => e.theta = value,
            SystematicKind::MinDistance => e.vibration.d0 = value,
            SystematicKind::Diameter => {
                let half_sphere = e.geometry.thickness == e.geometry.radius;
                e.geometry.radius = 0.5 * value;
                if half_sphere {
                    e.geometry.thickness = e.geometry.radius;
                }
            }
            SystematicKind::Thickness => e.geometry.thickness = value,
            SystematicKind::Amplitude => e.vibration.amplitude = value,
            SystematicKind::LateralOffset => {
                let current = experiment.geometry.offset_distance();
                e.geometry.lateral_offset = if current > 0.0 {
                    let [x, y] = experiment.geometry.lateral_offset;
                    [x / current * value, y / current * value]
                } else {
                    [value, 0.0]
                };
            }
        }
        e.geometry.validate()?;
        e.vibration.validate()?;
        Ok(e)
    }
}

impl fmt::Display for SystematicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A parameter the analysis assumed at `assumed` but which was measured as
/// `measured ± sigma`. For most rows `assumed == measured`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Systematic {
    pub kind: SystematicKind,
    pub assumed: f64,
    pub measured: f64,
    pub sigma: f64,
}

impl Systematic {
    pub fn symmetric(kind: SystematicKind, nominal: f64, sigma: f64) -> Self {
        Systematic {
            kind,
            assumed: nominal,
            measured: nominal,
            sigma,
        }
    }
}

/// The six measured uncertainties of the published setup, centred on the
/// values in `experiment`: θ ± 0.6°, d₀ ± 0.1 µm, diameter ± 2.5 µm,
/// thickness ± 35 µm, amplitude ± 0.1 nm, and an x-y misalignment of
/// 1.3 ± 0.8 µm against an assumed on-axis sensor.
pub fn standard_systematics(experiment: &Experiment) -> Vec<Systematic> {
    use SystematicKind::*;
    let v = |k: SystematicKind| k.value_in(experiment);
    vec![
        Systematic::symmetric(Angle, v(Angle), 0.6f64.to_radians()),
        Systematic::symmetric(MinDistance, v(MinDistance), 0.1e-6),
        Systematic::symmetric(Diameter, v(Diameter), 2.5e-6),
        Systematic::symmetric(Thickness, v(Thickness), 35e-6),
        Systematic::symmetric(Amplitude, v(Amplitude), 0.1e-9),
        Systematic {
            kind: LateralOffset,
            assumed: v(LateralOffset),
            measured: 1.3e-6,
            sigma: 0.8e-6,
        },
    ]
}

/// Additive correction to the coupling with its 1σ spread.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Correction {
    pub central: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystematicEntry {
    pub source: Systematic,
    pub correction: Correction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Budget {
    pub lambda: f64,
    /// Phase converted to coupling when propagating the shifts, rad.
    pub reference_phase: f64,
    pub entries: Vec<SystematicEntry>,
    pub total: Correction,
}

/// Which phase the budget converts to a coupling before shifting parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BudgetReference {
    /// The fitted central phase.
    Central,
    /// The statistical bound |φ| + z σ at the analysis confidence level.
    #[default]
    PhaseBound,
}

impl BudgetReference {
    pub fn phase(self, estimate: &PhaseEstimate, cl: f64) -> Result<f64> {
        Ok(match self {
            BudgetReference::Central => estimate.phi_central,
            BudgetReference::PhaseBound => {
                estimate.phi_central.abs() + z_score(cl)? * estimate.sigma_stat
            }
        })
    }
}

/// Shift-and-recompute propagation of setup uncertainties into the coupling.
///
/// For each parameter the coupling `g(p) = reference_phase / K(λ; p)` is
/// evaluated at `measured ± sigma` and compared with its value at the
/// assumed setting. The row correction is the mean of the two shifts and the
/// spread is half their difference. Rows add linearly in the central value
/// and in quadrature in the spread.
pub fn systematic_budget(
    lambda: f64,
    experiment: &Experiment,
    systematics: &[Systematic],
    reference_phase: f64,
) -> Result<Budget> {
    let coupling = |e: &Experiment| -> Result<f64> {
        let k = transfer_factor(lambda, e)?;
        if k == 0.0 {
            return Err(Error::Degenerate(format!(
                "transfer factor vanishes at λ = {lambda:e}"
            )));
        }
        Ok(reference_phase / k)
    };

    let mut entries = Vec::with_capacity(systematics.len());
    for s in systematics {
        if !(s.sigma >= 0.0) {
            return Err(Error::domain(format!("{}: negative uncertainty", s.kind)));
        }
        let correction = if s.sigma == 0.0 && s.measured == s.assumed {
            Correction::default()
        } else {
            let base = coupling(&s.kind.apply(experiment, s.assumed)?)?;
            let up = coupling(&s.kind.apply(experiment, s.measured + s.sigma)?)? - base;
            let down = coupling(&s.kind.apply(experiment, s.measured - s.sigma)?)? - base;
            Correction {
                central: 0.5 * (up + down),
                sigma: 0.5 * (up - down).abs(),
            }
        };
        entries.push(SystematicEntry {
            source: *s,
            correction,
        });
    }

    let total = Correction {
        central: entries.iter().map(|e| e.correction.central).sum(),
        sigma: entries
            .iter()
            .map(|e| e.correction.sigma.powi(2))
            .sum::<f64>()
            .sqrt(),
    };
    Ok(Budget {
        lambda,
        reference_phase,
        entries,
        total,
    })
}

/// Two-sided normal quantile for confidence level `cl` (1.96 at 0.95).
pub fn z_score(cl: f64) -> Result<f64> {
    if !(cl > 0.5 && cl < 1.0) {
        return Err(Error::domain(format!(
            "confidence level must lie in (0.5, 1), got {cl}"
        )));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 * (1.0 + cl)))
}

/// Upper bound on |g| from the phase estimate, systematic total and transfer
/// factor: `|g_central| + z σ_total`.
pub fn exclusion_limit(
    estimate: &PhaseEstimate,
    systematics: &Correction,
    k: f64,
    cl: f64,
) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::domain(format!(
            "transfer factor must be positive, got {k}"
        )));
    }
    let z = z_score(cl)?;
    let g_central = estimate.phi_central / k + systematics.central;
    let sigma = (estimate.sigma_stat / k).hypot(systematics.sigma);
    Ok(g_central.abs() + z * sigma)
}

/// Boson mass m_b c² in eV for force range `lambda` (m).
pub fn mass_from_lambda(lambda: f64, constants: &PhysicalConstants) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain(format!(
            "force range must be positive, got {lambda}"
        )));
    }
    Ok(constants.hbar_c / lambda)
}

/// Force range (m) for boson mass `mass_ev`.
pub fn lambda_from_mass(mass_ev: f64, constants: &PhysicalConstants) -> Result<f64> {
    if !(mass_ev > 0.0) {
        return Err(Error::domain(format!(
            "boson mass must be positive, got {mass_ev}"
        )));
    }
    Ok(constants.hbar_c / mass_ev)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExclusionPoint {
    pub lambda: f64,
    pub mass_ev: f64,
    pub g_limit: f64,
}

/// Inputs shared by every point of an exclusion analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitAnalysis {
    pub experiment: Experiment,
    pub estimate: PhaseEstimate,
    pub systematics: Vec<Systematic>,
    pub cl: f64,
    pub reference: BudgetReference,
}

impl LimitAnalysis {
    /// Measured phase, published setup and its six systematics at 95% CL.
    pub fn nominal() -> Self {
        let experiment = Experiment::nominal();
        LimitAnalysis {
            systematics: standard_systematics(&experiment),
            experiment,
            estimate: PhaseEstimate::measured(),
            cl: 0.95,
            reference: BudgetReference::PhaseBound,
        }
    }
}

/// Transfer factor, budget and bound at one force range.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport {
    pub transfer_factor: f64,
    pub budget: Budget,
    pub point: ExclusionPoint,
}

pub fn limit_at(lambda: f64, analysis: &LimitAnalysis) -> Result<LimitReport> {
    let k = transfer_factor(lambda, &analysis.experiment)?;
    if k == 0.0 {
        return Err(Error::Degenerate(format!(
            "transfer factor vanishes at λ = {lambda:e}"
        )));
    }
    let reference = analysis.reference.phase(&analysis.estimate, analysis.cl)?;
    let budget = systematic_budget(
        lambda,
        &analysis.experiment,
        &analysis.systematics,
        reference,
    )?;
    let g_limit = exclusion_limit(&analysis.estimate, &budget.total, k, analysis.cl)?;
    Ok(LimitReport {
        transfer_factor: k,
        budget,
        point: ExclusionPoint {
            lambda,
            mass_ev: mass_from_lambda(lambda, &analysis.experiment.constants)?,
            g_limit,
        },
    })
}

/// Exclusion bound at every force range of `lambdas`, in grid order.
pub fn exclusion_curve(lambdas: &[f64], analysis: &LimitAnalysis) -> Result<Vec<ExclusionPoint>> {
    lambdas
        .iter()
        .map(|&l| {
            if !(0.1e-6..=10e-3).contains(&l) {
                return Err(Error::domain(format!(
                    "force range {l:e} m outside the supported [1e-7, 1e-2] m"
                )));
            }
            Ok(limit_at(l, analysis)?.point)
        })
        .collect()
}

/// `n` log-spaced force ranges from `min` to `max` inclusive.
pub fn log_grid(min: f64, max: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(min > 0.0 && max > min) {
        return Err(Error::domain("log grid needs n ≥ 2 and 0 < min < max"));
    }
    let (a, b) = (min.ln(), max.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => min,
            _ if i == n - 1 => max,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect())
}
