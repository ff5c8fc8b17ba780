//! Experiment configuration file.
//!
//! TOML with one table per block and the unit in every key name. Missing keys
//! take the published setup's values; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nvsvi_core::inference::BudgetReference;
use nvsvi_core::spin::{PulseTiming, SyncVariant};
use nvsvi_core::{
    CouplingHypothesis, Experiment, LimitAnalysis, Numerics, PhaseEstimate, PhysicalConstants,
    SequenceConfig, SourceGeometry, Systematic, SystematicKind, VibrationModel,
};

use crate::error::CliError;

// Dividing by the exact power of ten keeps e.g. 200 µm at the nearest double to 2e-4.
const PER_UM: f64 = 1e6;
const PER_NM: f64 = 1e9;
const PER_US: f64 = 1e6;
const PER_NS: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryBlock {
    pub radius_um: f64,
    pub thickness_um: f64,
    pub rho_per_m3: f64,
    pub offset_x_um: f64,
    pub offset_y_um: f64,
}

impl Default for GeometryBlock {
    fn default() -> Self {
        GeometryBlock {
            radius_um: 250.0,
            thickness_um: 250.0,
            rho_per_m3: 1.33e30,
            offset_x_um: 0.0,
            offset_y_um: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VibrationBlock {
    pub d0_um: f64,
    pub amplitude_nm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency_khz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_rad_per_s: Option<f64>,
}

impl Default for VibrationBlock {
    fn default() -> Self {
        VibrationBlock {
            d0_um: 2.0,
            amplitude_nm: 165.2,
            frequency_khz: None,
            omega_rad_per_s: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pulses {
    Instantaneous,
    Finite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorBlock {
    pub theta_deg: f64,
    pub tau_us: f64,
    pub pi_half_ns: f64,
    pub pi_ns: f64,
    pub laser_init_us: f64,
    pub laser_readout_us: f64,
    pub variant: Variant,
    pub pulses: Pulses,
    pub phi_mw_deg: f64,
    pub contrast: f64,
    pub shots: u64,
    pub phase_points: usize,
}

/// Readout contrast at which 6e7 shots over 24 microwave phases give σ_φ = 0.0014.
pub const CALIBRATED_CONTRAST: f64 = 0.092_213_889_195_414_68;

impl Default for SensorBlock {
    fn default() -> Self {
        SensorBlock {
            theta_deg: 54.735_610_317_245_35,
            tau_us: 6.652,
            pi_half_ns: 64.0,
            pi_ns: 127.0,
            laser_init_us: 2.0,
            laser_readout_us: 4.4,
            variant: Variant::Plus,
            pulses: Pulses::Instantaneous,
            phi_mw_deg: 0.0,
            contrast: CALIBRATED_CONTRAST,
            shots: 60_000_000,
            phase_points: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypothesisBlock {
    pub lambda_um: Vec<f64>,
    pub mass_ev: Vec<f64>,
    pub g: f64,
}

impl Default for HypothesisBlock {
    fn default() -> Self {
        HypothesisBlock {
            lambda_um: vec![200.0],
            mass_ev: Vec::new(),
            g: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Bound,
    Central,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisBlock {
    pub cl: f64,
    pub quad_tol: f64,
    pub samples_per_tau: usize,
    pub time_steps: usize,
    pub seed: u64,
    pub phi_central_rad: f64,
    pub phi_sigma_rad: f64,
    pub budget_reference: Reference,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        AnalysisBlock {
            cl: 0.95,
            quad_tol: 1e-7,
            samples_per_tau: 4096,
            time_steps: 1 << 17,
            seed: 0,
            phi_central_rad: 0.0011,
            phi_sigma_rad: 0.0014,
            budget_reference: Reference::Bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystematicsBlock {
    pub theta_sigma_deg: f64,
    pub d0_sigma_um: f64,
    pub diameter_sigma_um: f64,
    pub thickness_sigma_um: f64,
    pub amplitude_sigma_nm: f64,
    /// Measured sensor offset from the lens axis; the analysis assumes the
    /// configured geometry offset.
    pub xy_offset_um: f64,
    pub xy_offset_sigma_um: f64,
}

impl Default for SystematicsBlock {
    fn default() -> Self {
        SystematicsBlock {
            theta_sigma_deg: 0.6,
            d0_sigma_um: 0.1,
            diameter_sigma_um: 2.5,
            thickness_sigma_um: 35.0,
            amplitude_sigma_nm: 0.1,
            xy_offset_um: 1.3,
            xy_offset_sigma_um: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryBlock,
    pub vibration: VibrationBlock,
    pub sensor: SensorBlock,
    pub hypothesis: HypothesisBlock,
    pub analysis: AnalysisBlock,
    pub systematics: SystematicsBlock,
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(
            key,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn non_negative(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(
            key,
            format!("must be non-negative and finite, got {v}"),
        ))
    }
}

fn finite(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(key, format!("must be finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The defaults-merged configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.experiment()?;
        self.lambdas()?;
        self.analysis()?;
        let s = &self.sensor;
        if !(s.contrast > 0.0 && s.contrast <= 1.0) {
            return Err(CliError::config(
                "sensor.contrast",
                format!("must lie in (0, 1], got {}", s.contrast),
            ));
        }
        if s.shots == 0 {
            return Err(CliError::config("sensor.shots", "must be at least 1"));
        }
        if s.phase_points < 3 {
            return Err(CliError::config(
                "sensor.phase_points",
                "must be at least 3",
            ));
        }
        finite("hypothesis.g", self.hypothesis.g)?;
        Ok(())
    }

    pub fn omega(&self) -> Result<f64, CliError> {
        match (self.vibration.frequency_khz, self.vibration.omega_rad_per_s) {
            (Some(_), Some(_)) => Err(CliError::config(
                "vibration.omega_rad_per_s",
                "give either frequency_khz or omega_rad_per_s, not both",
            )),
            (Some(f), None) => {
                Ok(2.0 * std::f64::consts::PI * positive("vibration.frequency_khz", f)? * 1e3)
            }
            (None, Some(w)) => positive("vibration.omega_rad_per_s", w),
            (None, None) => Ok(2.0 * std::f64::consts::PI * 74.452e3),
        }
    }

    pub fn geometry(&self) -> Result<SourceGeometry, CliError> {
        let g = &self.geometry;
        let radius = positive("geometry.radius_um", g.radius_um)? / PER_UM;
        let thickness = positive("geometry.thickness_um", g.thickness_um)? / PER_UM;
        if thickness > 2.0 * radius {
            return Err(CliError::config(
                "geometry.thickness_um",
                "must not exceed the sphere diameter",
            ));
        }
        let rho = non_negative("geometry.rho_per_m3", g.rho_per_m3)?;
        let offset = [
            finite("geometry.offset_x_um", g.offset_x_um)? / PER_UM,
            finite("geometry.offset_y_um", g.offset_y_um)? / PER_UM,
        ];
        SourceGeometry::new(radius, thickness, rho, offset)
            .map_err(|e| CliError::config("geometry", e.to_string()))
    }

    pub fn experiment(&self) -> Result<Experiment, CliError> {
        let v = &self.vibration;
        let vibration = VibrationModel::new(
            positive("vibration.d0_um", v.d0_um)? / PER_UM,
            non_negative("vibration.amplitude_nm", v.amplitude_nm)? / PER_NM,
            self.omega()?,
        )
        .map_err(|e| CliError::config("vibration", e.to_string()))?;

        let s = &self.sensor;
        let sequence = SequenceConfig {
            tau: positive("sensor.tau_us", s.tau_us)? / PER_US,
            variant: match s.variant {
                Variant::Plus => SyncVariant::PlusSync,
                Variant::Minus => SyncVariant::MinusSync,
            },
            pi_half_duration: non_negative("sensor.pi_half_ns", s.pi_half_ns)? / PER_NS,
            pi_duration: non_negative("sensor.pi_ns", s.pi_ns)? / PER_NS,
            laser_init_duration: non_negative("sensor.laser_init_us", s.laser_init_us)? / PER_US,
            laser_readout_duration: non_negative("sensor.laser_readout_us", s.laser_readout_us)?
                / PER_US,
            phi_mw: finite("sensor.phi_mw_deg", s.phi_mw_deg)?.to_radians(),
            timing: match s.pulses {
                Pulses::Instantaneous => PulseTiming::Instantaneous,
                Pulses::Finite => PulseTiming::Finite,
            },
        };

        let a = &self.analysis;
        if !(a.quad_tol > 0.0 && a.quad_tol <= 1e-2) {
            return Err(CliError::config(
                "analysis.quad_tol",
                format!("must lie in (0, 1e-2], got {}", a.quad_tol),
            ));
        }
        if a.samples_per_tau < 8 {
            return Err(CliError::config(
                "analysis.samples_per_tau",
                "must be at least 8",
            ));
        }

        Ok(Experiment {
            geometry: self.geometry()?,
            vibration,
            theta: finite("sensor.theta_deg", s.theta_deg)?.to_radians(),
            sequence,
            constants: PhysicalConstants::codata(),
            numerics: Numerics {
                samples_per_tau: a.samples_per_tau,
                quad_tol: a.quad_tol,
            },
        })
    }

    /// Force ranges (m) from the hypothesis block, listed λ first, then masses.
    pub fn lambdas(&self) -> Result<Vec<f64>, CliError> {
        let constants = PhysicalConstants::codata();
        let mut out = Vec::new();
        for (i, l) in self.hypothesis.lambda_um.iter().enumerate() {
            out.push(positive(&format!("hypothesis.lambda_um[{i}]"), *l)? / PER_UM);
        }
        for (i, m) in self.hypothesis.mass_ev.iter().enumerate() {
            let key = format!("hypothesis.mass_ev[{i}]");
            let h = CouplingHypothesis::from_boson_mass(positive(&key, *m)?, 0.0, &constants)
                .map_err(|e| CliError::config(&key, e.to_string()))?;
            out.push(h.lambda);
        }
        Ok(out)
    }

    pub fn estimate(&self) -> Result<PhaseEstimate, CliError> {
        let a = &self.analysis;
        PhaseEstimate::new(
            finite("analysis.phi_central_rad", a.phi_central_rad)?,
            non_negative("analysis.phi_sigma_rad", a.phi_sigma_rad)?,
        )
        .map_err(|e| CliError::config("analysis", e.to_string()))
    }

    pub fn systematics(&self, experiment: &Experiment) -> Result<Vec<Systematic>, CliError> {
        use SystematicKind::*;
        let s = &self.systematics;
        let v = |k: SystematicKind| k.value_in(experiment);
        Ok(vec![
            Systematic::symmetric(
                Angle,
                v(Angle),
                non_negative("systematics.theta_sigma_deg", s.theta_sigma_deg)?.to_radians(),
            ),
            Systematic::symmetric(
                MinDistance,
                v(MinDistance),
                non_negative("systematics.d0_sigma_um", s.d0_sigma_um)? / PER_UM,
            ),
            Systematic::symmetric(
                Diameter,
                v(Diameter),
                non_negative("systematics.diameter_sigma_um", s.diameter_sigma_um)? / PER_UM,
            ),
            Systematic::symmetric(
                Thickness,
                v(Thickness),
                non_negative("systematics.thickness_sigma_um", s.thickness_sigma_um)? / PER_UM,
            ),
            Systematic::symmetric(
                Amplitude,
                v(Amplitude),
                non_negative("systematics.amplitude_sigma_nm", s.amplitude_sigma_nm)? / PER_NM,
            ),
            Systematic {
                kind: LateralOffset,
                assumed: v(LateralOffset),
                measured: non_negative("systematics.xy_offset_um", s.xy_offset_um)? / PER_UM,
                sigma: non_negative("systematics.xy_offset_sigma_um", s.xy_offset_sigma_um)?
                    / PER_UM,
            },
        ])
    }

    pub fn analysis(&self) -> Result<LimitAnalysis, CliError> {
        let experiment = self.experiment()?;
        let cl = self.analysis.cl;
        if !(cl > 0.5 && cl < 1.0) {
            return Err(CliError::config(
                "analysis.cl",
                format!("must lie in (0.5, 1), got {cl}"),
            ));
        }
        Ok(LimitAnalysis {
            systematics: self.systematics(&experiment)?,
            experiment,
            estimate: self.estimate()?,
            cl,
            reference: match self.analysis.budget_reference {
                Reference::Bound => BudgetReference::PhaseBound,
                Reference::Central => BudgetReference::Central,
            },
        })
    }
}
