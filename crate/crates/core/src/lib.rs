//! Modelling and analysis of NV-center searches for the parity-odd spin- and
//! velocity-dependent electron–nucleon interaction.
//!
//! The pipeline runs source geometry ([`geometry`]) → source motion
//! ([`kinematics`]) → echo phase ([`spin`]) → phase fit, systematic budget and
//! exclusion limits ([`inference`]). All quantities are SI unless a name says
//! otherwise (`_ev`, `_deg`).

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod constants;
pub mod error;
pub mod geometry;
pub mod inference;
pub mod kinematics;
pub mod quadrature;
pub mod spin;

pub use constants::PhysicalConstants;
pub use error::{Error, Result};
pub use geometry::{
    effective_field, f_closed_form, f_quadrature, form_factor, point_kernel, CouplingHypothesis,
    FormFactorProfile, SourceGeometry,
};
pub use inference::{
    exclusion_curve, exclusion_limit, fit_phase, lambda_from_mass, limit_at, mass_from_lambda,
    standard_systematics, systematic_budget, transfer_factor, Budget, BudgetReference, Correction,
    ExclusionPoint, Experiment, LimitAnalysis, LimitReport, PhaseDatum, PhaseEstimate, Systematic,
    SystematicEntry, SystematicKind,
};
pub use kinematics::{beff_trace, FieldTrace, TraceParity, VelocityConvention, VibrationModel};
pub use spin::{
    accumulated_phase, echo_response, populations, simulate_readout, time_domain_phase, Numerics,
    PhaseMethod, PhaseResult, PulseTiming, SequenceConfig, SyncVariant,
};
