//! Coupled electrostatic-structural simulator for free-flexible-membrane
//! RF MEMS switches.
//!
//! The simulator models a metallic membrane resting on two pillars, actuated
//! by internal electrodes (between the pillars, pressing the ohmic contact
//! down) and external electrodes (on the overhangs, levering the contact up).
//! It computes static equilibria of the Euler-Bernoulli beam under
//! gap-dependent electrostatic traction, pull-in and pull-out voltages,
//! lever amplification versus pillar-inset ratio, stuck-state behavior under
//! dielectric charging and contact adhesion, and lumped-element S-parameters
//! of the resulting shunt switch.
//!
//! Module map:
//! - [`device`]: device description, validation, presets, and beam meshing
//! - [`fem`]: Hermite beam elements, banded assembly, constrained solves
//! - [`electrostatic`]: gap-dependent traction and its Newton linearization
//! - [`solver`]: nonlinear equilibrium, voltage continuation, fold detection
//! - [`stiction`]: stuck-state classification, unstick voltage, archetype
//!   minimum-contact pressures
//! - [`rf`]: lumped two-port switch model and Touchstone export
//! - [`config`], [`table`]: scenario configuration and CSV/manifest output

pub mod config;
pub mod device;
pub mod electrostatic;
pub mod fem;
pub mod rf;
pub mod solver;
pub mod stiction;
pub mod table;

pub use device::{
    build_mesh, validate_spec, width_at, BeamGeometry, ContactSpec, DeviceError, DeviceSpec,
    ElectrodeKind, ElectrodeZone, MaterialProps, Mesh, ValidatedSpec,
};
pub use electrostatic::{
    build_traction, effective_gap, traction, traction_jacobian, ActuationState, TractionProfile,
};
pub use fem::DeflectionField;
pub use rf::{
    contact_resistance, export_touchstone, fit_lumped, shunt_sparams, ContactLaw, SwitchCircuit,
    SwitchState, TwoPortResponse,
};
pub use solver::{
    equilibrium, find_pullin, find_pullout, sweep_ratio, trace_cv_curve, EquilibriumResult,
    PullInResult, PullOutResult, SolverError, SolverSettings,
};
pub use stiction::{
    min_pressure_to_contact, restoring_force, stuck_state, unstick_voltage, AdhesionModel,
    ArchetypeKind, BeamArchetype, StuckOutcome, StuckState,
};
