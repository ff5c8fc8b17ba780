//! Synchronized spin-echo sequence on the NV two-level sensor.
//!
//! Sequence time `t = 0` is the centre of the first π/2 pulse. The sensor then
//! evolves freely for `τ`, is inverted by a π pulse, evolves for another `τ`
//! and is read out after a final π/2 pulse of phase `φ_mw`. The anomalous
//! phase is the first free-window integral of `γ_e B` minus the second.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::geometry::{
    field_from_form_factor, CouplingHypothesis, FormFactorProfile, SourceGeometry, DEFAULT_QUAD_TOL,
};
use crate::kinematics::{FieldTrace, VibrationModel};
use crate::quadrature::{simpson, simpson_irregular};

/// Which turning point of the source the sequence is triggered on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncVariant {
    /// π/2 pulses at minimal distance; vibration phase π at sequence start.
    PlusSync,
    /// π/2 pulses at maximal distance; vibration phase 0 at sequence start.
    MinusSync,
}

impl SyncVariant {
    /// Vibration phase (rad) at sequence time zero.
    pub fn start_phase(self) -> f64 {
        match self {
            SyncVariant::PlusSync => PI,
            SyncVariant::MinusSync => 0.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            SyncVariant::PlusSync => SyncVariant::MinusSync,
            SyncVariant::MinusSync => SyncVariant::PlusSync,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PulseTiming {
    /// Ideal zero-length rotations.
    #[default]
    Instantaneous,
    /// Rotations take their configured durations; no phase accrues during them.
    Finite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceConfig {
    /// Free evolution time between the π/2 and π pulses, s.
    pub tau: f64,
    pub variant: SyncVariant,
    pub pi_half_duration: f64,
    pub pi_duration: f64,
    pub laser_init_duration: f64,
    pub laser_readout_duration: f64,
    /// Phase of the final π/2 pulse, rad.
    pub phi_mw: f64,
    pub timing: PulseTiming,
}

impl SequenceConfig {
    /// τ = 6.652 µs, 64/127 ns pulses, 2.0/4.4 µs laser, ideal pulses.
    pub fn nominal() -> Self {
        SequenceConfig {
            tau: 6.652e-6,
            variant: SyncVariant::PlusSync,
            pi_half_duration: 64e-9,
            pi_duration: 127e-9,
            laser_init_duration: 2.0e-6,
            laser_readout_duration: 4.4e-6,
            phi_mw: 0.0,
            timing: PulseTiming::Instantaneous,
        }
    }

    pub fn with_variant(mut self, variant: SyncVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::domain(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        let durations = [
            self.pi_half_duration,
            self.pi_duration,
            self.laser_init_duration,
            self.laser_readout_duration,
        ];
        if !durations.iter().all(|d| d.is_finite() && *d >= 0.0) {
            return Err(Error::domain(
                "pulse and laser durations must be non-negative",
            ));
        }
        if !self.phi_mw.is_finite() {
            return Err(Error::domain("phi_mw must be finite"));
        }
        Ok(())
    }

    /// The two free-evolution windows in sequence time.
    pub fn free_windows(&self) -> [(f64, f64); 2] {
        let (half, pi) = match self.timing {
            PulseTiming::Instantaneous => (0.0, 0.0),
            PulseTiming::Finite => (0.5 * self.pi_half_duration, self.pi_duration),
        };
        let first = (half, half + self.tau);
        let second = (first.1 + pi, first.1 + pi + self.tau);
        [first, second]
    }

    /// Sequence time at which the second free window ends.
    pub fn echo_end(&self) -> f64 {
        self.free_windows()[1].1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMethod {
    Analytic,
    TimeDomain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseResult {
    pub phi: f64,
    pub method: PhaseMethod,
}

/// Discretization controls for the phase integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    /// Simpson samples per free window of length τ.
    pub samples_per_tau: usize,
    /// Relative tolerance of any volume quadrature.
    pub quad_tol: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            samples_per_tau: 4096,
            quad_tol: DEFAULT_QUAD_TOL,
        }
    }
}

/// γ_e·B_eff along the sequence, with time measured from sequence start.
struct PhaseRate<'a> {
    profile: FormFactorProfile,
    hypothesis: &'a CouplingHypothesis,
    vibration: &'a VibrationModel,
    theta: f64,
    constants: &'a PhysicalConstants,
    t_offset: f64,
}

impl<'a> PhaseRate<'a> {
    fn new(
        hypothesis: &'a CouplingHypothesis,
        geometry: &SourceGeometry,
        vibration: &'a VibrationModel,
        theta: f64,
        seq: &SequenceConfig,
        constants: &'a PhysicalConstants,
        quad_tol: f64,
    ) -> Result<Self> {
        vibration.validate()?;
        seq.validate()?;
        let (d_min, d_max) = vibration.distance_range();
        let profile =
            FormFactorProfile::over_range(hypothesis.lambda, geometry, d_min, d_max, quad_tol)?;
        Ok(PhaseRate {
            profile,
            hypothesis,
            vibration,
            theta,
            constants,
            t_offset: seq.variant.start_phase() / vibration.omega,
        })
    }

    fn at(&self, t: f64) -> Result<f64> {
        let tv = t + self.t_offset;
        let f = self.profile.eval(self.vibration.distance_at(tv))?;
        let b = field_from_form_factor(
            self.hypothesis.g_product,
            f,
            self.vibration.velocity_at(tv),
            self.theta,
            self.constants,
        );
        Ok(self.constants.gamma_e * b)
    }
}

/// Simpson integral of `rate` over `window`, checked against the same rule on
/// every other sample.
fn window_integral<F>(rate: F, window: (f64, f64), samples: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    // Panel count divisible by 4 so the half grid is itself a Simpson grid.
    let panels = samples.max(8).div_ceil(4) * 4;
    let h = (window.1 - window.0) / panels as f64;
    let values = (0..=panels)
        .map(|i| rate(window.0 + h * i as f64))
        .collect::<Result<Vec<_>>>()?;
    let fine = simpson(&values, h)?;
    let coarse_values: Vec<f64> = values.iter().step_by(2).copied().collect();
    let coarse = simpson(&coarse_values, 2.0 * h)?;
    let magnitude: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let scale = simpson(&magnitude, h)?;
    if (fine - coarse).abs() > 1e-6 * scale {
        return Err(Error::NonConvergence {
            estimate: fine,
            error_bound: (fine - coarse).abs(),
            context: format!(
                "Simpson grid of {panels} panels on [{:e}, {:e}] (half grid gave {coarse:e})",
                window.0, window.1
            ),
        });
    }
    Ok(fine)
}

/// Anomalous echo phase by Simpson integration of `γ_e B_eff(t)`.
pub fn accumulated_phase(
    hypothesis: &CouplingHypothesis,
    geometry: &SourceGeometry,
    vibration: &VibrationModel,
    theta: f64,
    seq: &SequenceConfig,
    constants: &PhysicalConstants,
    numerics: &Numerics,
) -> Result<PhaseResult> {
    let rate = PhaseRate::new(
        hypothesis,
        geometry,
        vibration,
        theta,
        seq,
        constants,
        numerics.quad_tol,
    )?;
    let [w1, w2] = seq.free_windows();
    let first = window_integral(|t| rate.at(t), w1, numerics.samples_per_tau)?;
    let second = window_integral(|t| rate.at(t), w2, numerics.samples_per_tau)?;
    Ok(PhaseResult {
        phi: first - second,
        method: PhaseMethod::Analytic,
    })
}

fn node_index(times: &[f64], t: f64) -> Option<usize> {
    let i = times.partition_point(|&x| x < t);
    let spacing = |j: usize| {
        let lo = j.saturating_sub(1);
        let hi = (j + 1).min(times.len() - 1);
        (times[hi] - times[lo]).abs()
    };
    [i.checked_sub(1), Some(i)]
        .into_iter()
        .flatten()
        .filter(|&j| j < times.len())
        .find(|&j| (times[j] - t).abs() <= 1e-9 * spacing(j))
}

/// Echo phase `∫_w1 γ_e B dt − ∫_w2 γ_e B dt` of an arbitrary field trace.
///
/// The trace must have samples exactly at the window boundaries of `seq`.
pub fn echo_response(
    trace: &FieldTrace,
    seq: &SequenceConfig,
    constants: &PhysicalConstants,
) -> Result<f64> {
    seq.validate()?;
    let times = trace.times();
    let values = trace.values();
    let [w1, w2] = seq.free_windows();
    if times[0] > w1.0 + 1e-12 * seq.tau || *times.last().unwrap() < w2.1 - 1e-12 * seq.tau {
        return Err(Error::domain(format!(
            "trace covers [{:e}, {:e}] but the echo needs [{:e}, {:e}]",
            times[0],
            times.last().unwrap(),
            w1.0,
            w2.1
        )));
    }
    let mut integrals = [0.0; 2];
    for (slot, (a, b)) in integrals.iter_mut().zip([w1, w2]) {
        let (Some(i), Some(j)) = (node_index(times, a), node_index(times, b)) else {
            return Err(Error::domain(format!(
                "trace has no samples at the window boundaries {a:e}, {b:e}"
            )));
        };
        *slot = constants.gamma_e * simpson_irregular(&times[i..=j], &values[i..=j])?;
    }
    Ok(integrals[0] - integrals[1])
}

/// Populations of |m_S = 0⟩ after the positive and negative phase sequences.
pub fn populations(phi: f64, phi_mw: f64) -> (f64, f64) {
    let p_plus = 0.5 * (1.0 + (phi_mw + phi).cos());
    let p_minus = 0.5 * (1.0 + (phi_mw - phi).cos());
    (p_plus.clamp(0.0, 1.0), p_minus.clamp(0.0, 1.0))
}

/// Interference signal `P₊ − P₋`.
pub fn interference(phi: f64, phi_mw: f64) -> f64 {
    let (p, m) = populations(phi, phi_mw);
    p - m
}

type Spinor = [Complex64; 2];

/// Rotation by `angle` about an equatorial axis at azimuth `phase`.
fn rotate(state: Spinor, angle: f64, phase: f64) -> Spinor {
    let c = Complex64::new((0.5 * angle).cos(), 0.0);
    let s = (0.5 * angle).sin();
    let off_01 = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, -phase);
    let off_10 = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, phase);
    [
        c * state[0] + off_01 * state[1],
        off_10 * state[0] + c * state[1],
    ]
}

/// Free precession with midpoint-sampled detuning; returns the updated state.
fn precess<F>(mut state: Spinor, rate: &F, window: (f64, f64), steps: usize) -> Result<Spinor>
where
    F: Fn(f64) -> Result<f64>,
{
    let dt = (window.1 - window.0) / steps as f64;
    for k in 0..steps {
        let t = window.0 + (k as f64 + 0.5) * dt;
        state[1] *= Complex64::from_polar(1.0, rate(t)? * dt);
    }
    Ok(state)
}

fn propagate<F>(rate: &F, seq: &SequenceConfig, steps: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let [w1, w2] = seq.free_windows();
    let half = steps / 2;
    let mut psi: Spinor = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    psi = rotate(psi, PI / 2.0, 0.0);
    psi = precess(psi, rate, w1, half)?;
    psi = rotate(psi, PI, 0.0);
    psi = precess(psi, rate, w2, steps - half)?;

    let p0 = |phi_mw: f64| rotate(psi, PI / 2.0, phi_mw)[0].norm_sqr();
    // P(φ_mw) = [1 + cos(φ_mw + φ)]/2 at φ_mw = 0 and π/2.
    Ok((1.0 - 2.0 * p0(PI / 2.0)).atan2(2.0 * p0(0.0) - 1.0))
}

/// Anomalous phase from explicit propagation of the two-level state through
/// the sequence. Pulses are ideal; the field acts as a detuning on |−1⟩.
pub fn time_domain_phase(
    hypothesis: &CouplingHypothesis,
    geometry: &SourceGeometry,
    vibration: &VibrationModel,
    theta: f64,
    seq: &SequenceConfig,
    constants: &PhysicalConstants,
    n_steps: usize,
    quad_tol: f64,
) -> Result<PhaseResult> {
    if n_steps < 1000 {
        return Err(Error::domain(format!(
            "need at least 1000 steps, got {n_steps}"
        )));
    }
    let rate = PhaseRate::new(
        hypothesis, geometry, vibration, theta, seq, constants, quad_tol,
    )?;
    let f = |t: f64| rate.at(t);
    let fine = propagate(&f, seq, n_steps)?;
    let coarse = propagate(&f, seq, n_steps / 2)?;
    // Midpoint error drops 4× on doubling; the coarse–fine gap bounds it.
    if (fine - coarse).abs() > 1e-8 * fine.abs().max(1e-3) {
        return Err(Error::NonConvergence {
            estimate: fine,
            error_bound: (fine - coarse).abs(),
            context: format!("time-domain propagation with {n_steps} steps"),
        });
    }
    Ok(PhaseResult {
        phi: fine,
        method: PhaseMethod::TimeDomain,
    })
}

/// One simulated interference measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Readout {
    pub interference: f64,
    pub std_error: f64,
}

/// Binomial readout of `I = P₊ − P₋` over `shots` repetitions of each sequence.
///
/// The populations are modelled as `(1 ± I)/2` shrunk towards ½ by `contrast`;
/// the estimate is rescaled by `1/contrast`. The standard error is the model
/// value at the true populations.
pub fn simulate_readout<R: Rng + ?Sized>(
    i_true: f64,
    shots: u64,
    contrast: f64,
    rng: &mut R,
) -> Result<Readout> {
    if shots == 0 {
        return Err(Error::domain("need at least one shot"));
    }
    if !(contrast > 0.0 && contrast <= 1.0) {
        return Err(Error::domain(format!(
            "contrast must lie in (0, 1], got {contrast}"
        )));
    }
    if !(i_true.abs() <= 1.0) {
        return Err(Error::domain(format!(
            "interference must lie in [-1, 1], got {i_true}"
        )));
    }
    let p_plus = 0.5 * (1.0 + contrast * i_true);
    let p_minus = 0.5 * (1.0 - contrast * i_true);
    let draw = |p: f64, rng: &mut R| -> Result<u64> {
        let dist = Binomial::new(shots, p).map_err(|e| Error::domain(e.to_string()))?;
        Ok(dist.sample(rng))
    };
    let k_plus = draw(p_plus, rng)?;
    let k_minus = draw(p_minus, rng)?;
    let n = shots as f64;
    let interference = (k_plus as f64 - k_minus as f64) / (n * contrast);
    let std_error =
        (p_plus * (1.0 - p_plus) + p_minus * (1.0 - p_minus)).sqrt() / (contrast * n.sqrt());
    Ok(Readout {
        interference,
        std_error,
    })
}

/// Contrast at which a fit over `phi_mw` with `total_shots` split evenly across
/// the points yields phase uncertainty `target_sigma_phi` (small-φ limit).
pub fn calibrate_contrast(total_shots: u64, phi_mw: &[f64], target_sigma_phi: f64) -> Result<f64> {
    if phi_mw.is_empty() || total_shots == 0 {
        return Err(Error::domain("need shots and at least one phase point"));
    }
    if !(target_sigma_phi > 0.0) {
        return Err(Error::domain("target uncertainty must be positive"));
    }
    let per_point = total_shots as f64 / phi_mw.len() as f64;
    let leverage: f64 = phi_mw.iter().map(|p| p.sin().powi(2)).sum();
    if leverage < 1e-20 * phi_mw.len() as f64 {
        return Err(Error::Unidentifiable(
            "all microwave phases are multiples of π".into(),
        ));
    }
    // σ_I = 1/(C √(2n)) at I ≈ 0, so σ_φ⁻² = 2 C² n Σ sin²φ_mw.
    let contrast = 1.0 / (target_sigma_phi * (2.0 * per_point * leverage).sqrt());
    if contrast > 1.0 {
        return Err(Error::Degenerate(format!(
            "target σ_φ = {target_sigma_phi} needs contrast {contrast:.3} > 1"
        )));
    }
    Ok(contrast)
}

/// Uniform microwave-phase grid over `[0, 2π)`.
pub fn phase_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| 2.0 * PI * i as f64 / points as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::TraceParity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn theta() -> f64 {
        (1.0 / 3f64.sqrt()).acos()
    }

    fn nominal_phase(g: f64, seq: &SequenceConfig) -> f64 {
        accumulated_phase(
            &CouplingHypothesis::new(200e-6, g).unwrap(),
            &SourceGeometry::nominal(),
            &VibrationModel::nominal(),
            theta(),
            seq,
            &PhysicalConstants::codata(),
            &Numerics::default(),
        )
        .unwrap()
        .phi
    }

    #[test]
    fn pulses_match_textbook_states() {
        let psi = rotate(
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            PI / 2.0,
            0.0,
        );
        assert!((psi[0] - Complex64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((psi[1] - Complex64::new(0.0, -FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn zero_coupling_and_perpendicular_give_zero() {
        let seq = SequenceConfig::nominal();
        assert_eq!(nominal_phase(0.0, &seq), 0.0);
        let phi = accumulated_phase(
            &CouplingHypothesis::new(200e-6, 1.0).unwrap(),
            &SourceGeometry::nominal(),
            &VibrationModel::nominal(),
            PI / 2.0,
            &seq,
            &PhysicalConstants::codata(),
            &Numerics::default(),
        )
        .unwrap()
        .phi;
        assert!(phi.abs() < 1e-15 * nominal_phase(1.0, &seq).abs());
    }

    #[test]
    fn nominal_phase_per_unit_coupling() {
        // Oracle: scipy quad of the closed form composed with Simpson on 801
        // points gave -5.7937447e15; rough estimate cosθ f 4A / 2π.
        let phi = nominal_phase(1.0, &SequenceConfig::nominal());
        assert!((phi / -5.793_744_7e15 - 1.0).abs() < 1e-6, "{phi:e}");
    }

    #[test]
    fn variants_are_antisymmetric() {
        // Exact when the π pulse sits at the opposite turning point.
        let (seq, _) = echo_seq();
        let plus = nominal_phase(1e-18, &seq);
        let minus = nominal_phase(1e-18, &seq.with_variant(SyncVariant::MinusSync));
        assert!(((plus + minus) / plus).abs() < 1e-9);

        // τ = 6.652 µs is 1% short of π/ω, leaving a ~7e-7 relative mismatch.
        let seq = SequenceConfig::nominal();
        let plus = nominal_phase(1e-18, &seq);
        let minus = nominal_phase(1e-18, &seq.with_variant(SyncVariant::MinusSync));
        assert!(((plus + minus) / plus).abs() < 1e-5);
    }

    #[test]
    fn finite_pulses_shift_phase_slightly() {
        let ideal = nominal_phase(1.0, &SequenceConfig::nominal());
        let seq = SequenceConfig {
            timing: PulseTiming::Finite,
            ..SequenceConfig::nominal()
        };
        let finite = nominal_phase(1.0, &seq);
        let rel = (finite - ideal) / ideal;
        assert!(rel.abs() > 1e-6 && rel.abs() < 0.05, "{rel}");
    }

    #[test]
    fn populations_identities() {
        assert_eq!(populations(0.0, 0.0), (1.0, 1.0));
        let (p, m) = populations(PI / 2.0, 0.0);
        assert!((p - 0.5).abs() < 1e-15 && (m - 0.5).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let phi: f64 = rng.random_range(-PI..PI);
            let mw: f64 = rng.random_range(0.0..2.0 * PI);
            let (p, m) = populations(phi, mw);
            assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&m));
            assert!((p - m + mw.sin() * phi.sin()).abs() < 1e-14);
        }
    }

    fn echo_seq() -> (SequenceConfig, VibrationModel) {
        let vib = VibrationModel::nominal();
        let seq = SequenceConfig {
            tau: PI / vib.omega,
            ..SequenceConfig::nominal()
        };
        (seq, vib)
    }

    #[test]
    fn echo_cancels_static_field() {
        let (seq, _) = echo_seq();
        let k = PhysicalConstants::codata();
        let tr = FieldTrace::sample(0.0, 2.0 * seq.tau, 4097, TraceParity::Custom, |_| Ok(1e-6))
            .unwrap();
        let phi = echo_response(&tr, &seq, &k).unwrap();
        assert!(phi.abs() <= 1e-12 * k.gamma_e * 1e-6 * 2.0 * seq.tau);
    }

    #[test]
    fn echo_doubles_velocity_odd_field() {
        let (seq, vib) = echo_seq();
        let k = PhysicalConstants::codata();
        let start = seq.variant.start_phase();
        let tr = FieldTrace::sample(0.0, 2.0 * seq.tau, 4097, TraceParity::VelocityOdd, |t| {
            Ok(1e-9 * (vib.omega * t + start).sin())
        })
        .unwrap();
        let phi = echo_response(&tr, &seq, &k).unwrap();
        // ∫_0^τ sin(ωt + π) dt = -2/ω
        let half = -k.gamma_e * 1e-9 * 2.0 / vib.omega;
        assert!(
            (phi / (2.0 * half) - 1.0).abs() < 1e-9,
            "{phi} vs {}",
            2.0 * half
        );
    }

    #[test]
    fn echo_requires_coverage_and_nodes() {
        let (seq, _) = echo_seq();
        let k = PhysicalConstants::codata();
        let short =
            FieldTrace::sample(0.0, seq.tau, 100, TraceParity::Custom, |_| Ok(0.0)).unwrap();
        assert!(matches!(
            echo_response(&short, &seq, &k),
            Err(Error::Domain(_))
        ));
        // 100 points do not put a node at τ.
        let misaligned =
            FieldTrace::sample(0.0, 2.0 * seq.tau, 100, TraceParity::Custom, |_| Ok(0.0)).unwrap();
        assert!(matches!(
            echo_response(&misaligned, &seq, &k),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn time_domain_matches_analytic() {
        let seq = SequenceConfig::nominal();
        let per_g = nominal_phase(1.0, &seq);
        let g = 1e-3 / per_g.abs();
        let h = CouplingHypothesis::new(200e-6, g).unwrap();
        let td = time_domain_phase(
            &h,
            &SourceGeometry::nominal(),
            &VibrationModel::nominal(),
            theta(),
            &seq,
            &PhysicalConstants::codata(),
            1 << 16,
            DEFAULT_QUAD_TOL,
        )
        .unwrap();
        assert_eq!(td.method, PhaseMethod::TimeDomain);
        assert!(
            (td.phi - per_g * g).abs() < 1e-9,
            "{} vs {}",
            td.phi,
            per_g * g
        );
    }

    #[test]
    fn time_domain_rejects_few_steps() {
        let h = CouplingHypothesis::new(200e-6, 0.0).unwrap();
        let r = time_domain_phase(
            &h,
            &SourceGeometry::nominal(),
            &VibrationModel::nominal(),
            theta(),
            &SequenceConfig::nominal(),
            &PhysicalConstants::codata(),
            999,
            DEFAULT_QUAD_TOL,
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn readout_is_deterministic_and_unbiased() {
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        let ra = simulate_readout(0.3, 10_000, 0.5, &mut a).unwrap();
        let rb = simulate_readout(0.3, 10_000, 0.5, &mut b).unwrap();
        assert_eq!(ra, rb);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let big = simulate_readout(0.25, 100_000_000, 1.0, &mut rng).unwrap();
        assert!((big.interference - 0.25).abs() < 5.0 * big.std_error);
        let null = simulate_readout(0.0, 1_000_000, 1.0, &mut rng).unwrap();
        assert!(null.interference.abs() < 5.0 * null.std_error);
    }

    #[test]
    fn readout_error_scales_inverse_sqrt() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = simulate_readout(0.1, 1_000, 0.3, &mut rng).unwrap();
        let b = simulate_readout(0.1, 4_000, 0.3, &mut rng).unwrap();
        assert!((a.std_error / b.std_error - 2.0).abs() < 1e-12);
    }

    #[test]
    fn readout_rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(simulate_readout(0.0, 0, 0.5, &mut rng).is_err());
        assert!(simulate_readout(0.0, 10, 0.0, &mut rng).is_err());
        assert!(simulate_readout(0.0, 10, 1.5, &mut rng).is_err());
        assert!(simulate_readout(1.5, 10, 0.5, &mut rng).is_err());
    }

    #[test]
    fn contrast_calibration() {
        let grid = phase_grid(24);
        let c = calibrate_contrast(60_000_000, &grid, 0.0014).unwrap();
        // Σ sin² = 12 over 24 points, n = 2.5e6 → C = 1/(0.0014·√(6e7)).
        assert!((c - 1.0 / (0.0014 * 6e7f64.sqrt())).abs() < 1e-12);
        assert!(calibrate_contrast(10, &grid, 0.0014).is_err());
        assert!(matches!(
            calibrate_contrast(100, &[0.0, PI], 0.1),
            Err(Error::Unidentifiable(_))
        ));
    }
}
