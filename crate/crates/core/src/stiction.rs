//! Stuck-state analysis and anti-stiction scans.
//!
//! Dielectric charging is modeled as a residual voltage offset on the
//! internal electrodes; contact adhesion as a per-contact pull-off force
//! threshold at the ohmic bumps. A device is stuck when the contacted
//! equilibrium survives at zero drive; the external electrodes then act as
//! an electrostatic restoring system whose unstick voltage this module
//! locates. The archetype comparison reproduces the minimum-pressure-to-
//! contact ranking of cantilever, clamped-clamped, and free-membrane beams.

use thiserror::Error;

use crate::device::{
    build_mesh, validate_spec, DeviceError, ElectrodeKind, ValidatedSpec, WidthSegment,
};
use crate::electrostatic::ActuationState;
use crate::fem::{
    assemble, assemble_traction_load, solve_with_prescribed, DeflectionField, FemError,
};
use crate::solver::fold::{
    bracket_event_ascending, bracket_release, AscendOutcome, ReleaseOutcome,
};
use crate::solver::{
    contacted_state, pullin_on_system, BeamPath, BeamState, BeamSystem, EquilibriumResult,
    SolverError, SolverSettings, StopKind,
};

/// Contact adhesion as a pull-off force threshold at each ohmic contact.
///
/// The anti-stiction studies use the charging surrogate alone, so the
/// default is zero; nonzero values support what-if studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdhesionModel {
    /// Pull-off force per ohmic contact node (N, >= 0).
    pub pull_off_per_contact: f64,
}

impl Default for AdhesionModel {
    fn default() -> Self {
        Self {
            pull_off_per_contact: 0.0,
        }
    }
}

/// A contacted equilibrium that survives at zero drive.
#[derive(Debug, Clone)]
pub struct StuckState {
    /// Converged equilibrium with the charge offset active and zero drive.
    pub equilibrium: EquilibriumResult,
    /// Per contact node: electrostatic hold + adhesion - elastic restoring,
    /// i.e. contact force + adhesion (N, >= 0 while stuck).
    pub holding_margin: Vec<f64>,
    pub v_charge_internal: f64,
    pub adhesion: AdhesionModel,
}

/// Outcome of [`stuck_state`]; releasing is a valid result, not an error.
#[derive(Debug, Clone)]
pub enum StuckOutcome {
    Stuck(StuckState),
    /// The membrane released on the way to zero drive; carries the free
    /// equilibrium at zero drive with the charge offset still active.
    NotStuck(EquilibriumResult),
}

impl StuckOutcome {
    pub fn is_stuck(&self) -> bool {
        matches!(self, StuckOutcome::Stuck(_))
    }
}

/// Errors from the stiction module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StictionError {
    #[error("membrane is not in contact")]
    NoContact,
    #[error("no unstick below {v_max} V (max achieved release margin {max_margin:.3e} N)")]
    NoUnstickBelowVmax { v_max: f64, max_margin: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// Drives the internal electrodes past pull-in, then removes the drive with
/// the charge offset active and classifies the zero-drive state.
pub fn stuck_state(
    device: &ValidatedSpec,
    v_charge_internal: f64,
    adhesion: &AdhesionModel,
    settings: &SolverSettings,
) -> Result<StuckOutcome, StictionError> {
    let mesh = build_mesh(device, settings.n_elements)?;
    let system = BeamSystem::new(&mesh, settings)?.with_adhesion(adhesion.pull_off_per_contact);
    let base = ActuationState {
        v_charge_internal,
        ..ActuationState::rest()
    };
    let (v_start, contacted) = contacted_state(&system, ElectrodeKind::Internal, &base, settings)?;
    let path = BeamPath {
        system: &system,
        electrodes: ElectrodeKind::Internal,
        base,
    };
    let outcome = bracket_release(
        &path,
        contacted,
        system.flat_state(),
        v_start,
        0.0,
        settings.v_step,
        settings.bisect_tol,
        |s: &BeamState| !system.any_contact(s),
    )
    .map_err(|v| SolverError::NoConvergence {
        voltage: v,
        iterations: settings.max_newton_iters,
        residual: f64::NAN,
    })?;
    match outcome {
        ReleaseOutcome::Held(state) => {
            let st = base.with_drive(ElectrodeKind::Internal, 0.0);
            let newton = system.solve(&st, &state).map_err(StictionError::Solver)?;
            let equilibrium = system.result(&st, &newton)?;
            let holding_margin = equilibrium
                .contact_forces
                .iter()
                .map(|f| f + adhesion.pull_off_per_contact)
                .collect();
            Ok(StuckOutcome::Stuck(StuckState {
                equilibrium,
                holding_margin,
                v_charge_internal,
                adhesion: *adhesion,
            }))
        }
        ReleaseOutcome::Released(b) => {
            // Re-solve the free branch at zero drive for reporting.
            let st = base.with_drive(ElectrodeKind::Internal, 0.0);
            let newton = system
                .solve(&st, &b.stable_state)
                .map_err(StictionError::Solver)?;
            Ok(StuckOutcome::NotStuck(system.result(&st, &newton)?))
        }
    }
}

/// Ascending external-voltage scan from a stuck state until the internal
/// contact set empties; bisection refines the release voltage.
pub fn unstick_voltage(
    device: &ValidatedSpec,
    stuck: &StuckState,
    v_ext_max: f64,
    settings: &SolverSettings,
) -> Result<f64, StictionError> {
    let mesh = build_mesh(device, settings.n_elements)?;
    let system =
        BeamSystem::new(&mesh, settings)?.with_adhesion(stuck.adhesion.pull_off_per_contact);
    let base = ActuationState {
        v_charge_internal: stuck.v_charge_internal,
        ..ActuationState::rest()
    };
    let start = system.state_from_contacts(
        &stuck.equilibrium.deflection,
        &stuck.equilibrium.contact_nodes,
    );
    // Check the starting point itself: a state held by nothing releases at 0 V.
    let st0 = base.with_drive(ElectrodeKind::External, 0.0);
    let at_zero = system.solve(&st0, &start).map_err(StictionError::Solver)?;
    if !system.internal_contact(&at_zero.state) {
        return Ok(0.0);
    }
    let path = BeamPath {
        system: &system,
        electrodes: ElectrodeKind::External,
        base,
    };
    let outcome = bracket_event_ascending(
        &path,
        at_zero.state,
        system.flat_state(),
        0.0,
        v_ext_max,
        settings.v_step,
        settings.bisect_tol,
        |s: &BeamState| !system.internal_contact(s),
    )
    .map_err(|v| SolverError::NoConvergence {
        voltage: v,
        iterations: settings.max_newton_iters,
        residual: f64::NAN,
    })?;
    match outcome {
        AscendOutcome::Event(b) => Ok(b.v_unstable),
        AscendOutcome::NoEvent(state) => {
            // Report how close the scan came: largest contact tension demanded
            // minus the adhesion capacity (negative = release never close).
            let st = base.with_drive(ElectrodeKind::External, v_ext_max);
            let newton = system.solve(&st, &state).map_err(StictionError::Solver)?;
            let result = system.result(&st, &newton)?;
            let max_tension = result
                .contact_forces
                .iter()
                .zip(&result.contact_kinds)
                .filter(|&(_, k)| *k == StopKind::Ohmic)
                .map(|(f, _)| -f)
                .fold(f64::NEG_INFINITY, f64::max);
            Err(StictionError::NoUnstickBelowVmax {
                v_max: v_ext_max,
                max_margin: max_tension - stuck.adhesion.pull_off_per_contact,
            })
        }
    }
}

/// Elastic reaction at each ohmic contact with all voltages zero: the force
/// the membrane exerts upward against the stops when held at the contacted
/// shape.
pub fn restoring_force(
    device: &ValidatedSpec,
    deflection_at_contact: &DeflectionField,
    settings: &SolverSettings,
) -> Result<Vec<f64>, StictionError> {
    let mesh = build_mesh(device, settings.n_elements)?;
    let stop = mesh.contact_stop;
    let contacted: Vec<usize> = mesh
        .contact_nodes
        .iter()
        .copied()
        .filter(|&n| deflection_at_contact.depth(n) >= stop * (1.0 - 1e-9))
        .collect();
    if contacted.is_empty() {
        return Err(StictionError::NoContact);
    }
    let k = assemble(&mesh);
    let mut prescribed: Vec<(usize, f64)> =
        mesh.pillar_nodes.iter().map(|&n| (2 * n, 0.0)).collect();
    for &n in &contacted {
        prescribed.push((2 * n, -stop));
    }
    let sol = solve_with_prescribed(&k, &prescribed, &vec![0.0; mesh.n_dofs()], None)?;
    // The constraint pushes down (negative) to hold the membrane; the
    // restoring force is the equal-and-opposite upward pull.
    Ok(sol
        .reactions
        .iter()
        .filter(|(d, _)| contacted.iter().any(|&n| *d == 2 * n))
        .map(|&(_, r)| -r)
        .collect())
}

/// Support archetypes compared in the minimum-pressure study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchetypeKind {
    Cantilever,
    ClampedClamped,
    FreeMembrane,
    FreeMembraneWithExternalHold,
}

/// A comparison beam sharing the device's length, thickness, and material.
///
/// All archetypes use a uniform planform (the device's headline width): the
/// published comparison is between generic structures, not the production
/// H-shape. The membrane archetypes keep the pillar and electrode layout so
/// the externally held variant can collapse its overhangs; contact bumps are
/// stripped everywhere, the study measures first touch of the gap itself.
#[derive(Debug, Clone)]
pub struct BeamArchetype {
    pub kind: ArchetypeKind,
    pub device: ValidatedSpec,
}

impl BeamArchetype {
    pub fn new(kind: ArchetypeKind, device: ValidatedSpec) -> Self {
        Self { kind, device }
    }

    fn study_spec(&self) -> Result<ValidatedSpec, DeviceError> {
        let mut spec = self.device.spec().clone();
        spec.contacts.positions.clear();
        let width = spec.geometry.width_segments[0].width;
        spec.geometry.width_segments = vec![WidthSegment {
            x_start: 0.0,
            x_end: spec.geometry.length,
            width,
        }];
        match self.kind {
            ArchetypeKind::Cantilever | ArchetypeKind::ClampedClamped => {
                spec.electrodes.clear();
            }
            ArchetypeKind::FreeMembrane | ArchetypeKind::FreeMembraneWithExternalHold => {}
        }
        validate_spec(spec)
    }

    fn clamped_dofs(&self, mesh: &crate::device::Mesh) -> Vec<usize> {
        let last = mesh.n_nodes() - 1;
        match self.kind {
            ArchetypeKind::Cantilever => vec![0, 1],
            ArchetypeKind::ClampedClamped => vec![0, 1, 2 * last, 2 * last + 1],
            ArchetypeKind::FreeMembrane | ArchetypeKind::FreeMembraneWithExternalHold => {
                mesh.pillar_nodes.iter().map(|&n| 2 * n).collect()
            }
        }
    }

    fn detection_nodes(&self, mesh: &crate::device::Mesh) -> (usize, usize) {
        match self.kind {
            ArchetypeKind::Cantilever | ArchetypeKind::ClampedClamped => (0, mesh.n_nodes() - 1),
            ArchetypeKind::FreeMembrane | ArchetypeKind::FreeMembraneWithExternalHold => {
                (mesh.pillar_nodes[0], mesh.pillar_nodes[1])
            }
        }
    }
}

/// Smallest uniform pressure whose static solution reaches the given gap.
///
/// The unactuated archetypes are linear, so the pressure follows from one
/// unit-pressure solve; the externally held membrane is solved nonlinearly
/// with its external zones collapsed at 1.1x their pull-in voltage.
pub fn min_pressure_to_contact(
    archetype: &BeamArchetype,
    gap: f64,
    settings: &SolverSettings,
) -> Result<f64, StictionError> {
    let spec = archetype.study_spec()?;
    let mesh = build_mesh(&spec, settings.n_elements)?;
    match archetype.kind {
        ArchetypeKind::FreeMembraneWithExternalHold => {
            held_min_pressure(archetype, &spec, gap, settings)
        }
        _ => {
            let k = assemble(&mesh);
            let unit: Vec<f64> = mesh.elements.iter().map(|e| -e.width).collect();
            let f = assemble_traction_load(&mesh, &unit);
            let fixed = archetype.clamped_dofs(&mesh);
            let sol = crate::fem::solve_constrained(&k, &fixed, &f, None)?;
            let (lo, hi) = archetype.detection_nodes(&mesh);
            let peak = (lo..=hi).fold(0.0f64, |acc, n| acc.max(sol.deflection.depth(n)));
            Ok(gap / peak)
        }
    }
}

fn held_min_pressure(
    archetype: &BeamArchetype,
    spec: &ValidatedSpec,
    gap: f64,
    settings: &SolverSettings,
) -> Result<f64, StictionError> {
    let mesh = build_mesh(spec, settings.n_elements)?;
    let system = BeamSystem::new(&mesh, settings)?;
    let pi = pullin_on_system(
        &system,
        ElectrodeKind::External,
        &ActuationState::rest(),
        60.0,
        settings,
    )?;
    let v_hold = 1.1 * pi.v_pullin;
    // Walk onto the collapsed external branch at the hold voltage.
    let mut warm = system.state_from_deflection(&pi.deflection_at_onset);
    let mut v = pi.v_pullin;
    loop {
        let st = ActuationState::external(v);
        warm = system
            .solve(&st, &warm)
            .map_err(StictionError::Solver)?
            .state;
        if v >= v_hold {
            break;
        }
        v = (v + settings.v_step).min(v_hold);
    }
    let hold_state = ActuationState::external(v_hold);
    let (lo, hi) = archetype.detection_nodes(&mesh);
    let touched =
        |s: &BeamState| -> bool { (lo..=hi).any(|n| s.u.depth(n) >= gap * (1.0 - 1e-12)) };

    // Bracket the touch pressure geometrically, then bisect.
    let solve_at = |p: f64, warm: &BeamState| -> Result<BeamState, StictionError> {
        Ok(system
            .solve_with_pressure(&hold_state, warm, p)
            .map_err(StictionError::Solver)?
            .state)
    };
    let mut p_lo = 0.0;
    let mut s_lo = warm.clone();
    // Linear estimate from the unactuated membrane: pressure to travel the
    // gap plus the held lift.
    let k = assemble(&mesh);
    let unit: Vec<f64> = mesh.elements.iter().map(|e| -e.width).collect();
    let f = assemble_traction_load(&mesh, &unit);
    let fixed = archetype.clamped_dofs(&mesh);
    let lin = crate::fem::solve_constrained(&k, &fixed, &f, None)?;
    let peak_unit = (lo..=hi).fold(0.0f64, |acc, n| acc.max(lin.deflection.depth(n)));
    let lift = warm.u.max_up();
    let mut p_hi = (gap + lift) / peak_unit;
    let mut s_hi;
    loop {
        let s = solve_at(p_hi, &s_lo)?;
        if touched(&s) {
            s_hi = s;
            break;
        }
        p_lo = p_hi;
        s_lo = s;
        p_hi *= 1.5;
        if p_hi > 1e12 {
            return Err(StictionError::NoContact);
        }
    }
    while (p_hi - p_lo) > 1e-4 * p_hi {
        let mid = 0.5 * (p_lo + p_hi);
        let s = solve_at(mid, &s_lo)?;
        if touched(&s) {
            p_hi = mid;
            s_hi = s;
        } else {
            p_lo = mid;
            s_lo = s;
        }
    }
    let _ = s_hi;
    Ok(p_hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::presets;

    fn device_07() -> ValidatedSpec {
        validate_spec(presets::switch_07um()).unwrap()
    }

    fn settings() -> SolverSettings {
        SolverSettings {
            n_elements: 120,
            ..SolverSettings::default()
        }
    }

    #[test]
    fn no_charge_no_adhesion_not_stuck() {
        let outcome =
            stuck_state(&device_07(), 0.0, &AdhesionModel::default(), &settings()).unwrap();
        assert!(!outcome.is_stuck());
        if let StuckOutcome::NotStuck(eq) = outcome {
            assert!(eq.contact_nodes.is_empty());
        }
    }

    #[test]
    fn strong_charge_sticks() {
        // An offset far above the release voltage must hold the contact.
        let outcome =
            stuck_state(&device_07(), 3.0, &AdhesionModel::default(), &settings()).unwrap();
        assert!(outcome.is_stuck());
        if let StuckOutcome::Stuck(s) = &outcome {
            assert!(!s.equilibrium.contact_nodes.is_empty());
            assert!(s.holding_margin.iter().all(|&m| m >= 0.0));
        }
    }

    #[test]
    fn adhesion_alone_sticks() {
        // Generous pull-off threshold holds the contact even with no charge.
        let adhesion = AdhesionModel {
            pull_off_per_contact: 1e-4,
        };
        let outcome = stuck_state(&device_07(), 0.0, &adhesion, &settings()).unwrap();
        assert!(outcome.is_stuck());
    }

    #[test]
    fn restoring_force_requires_contact() {
        let device = device_07();
        let s = settings();
        let mesh = build_mesh(&device, s.n_elements).unwrap();
        let flat = DeflectionField::zeros(mesh.n_nodes());
        assert!(matches!(
            restoring_force(&device, &flat, &s),
            Err(StictionError::NoContact)
        ));
    }

    #[test]
    fn restoring_force_scales_linearly() {
        let device = device_07();
        let s = settings();
        let mesh = build_mesh(&device, s.n_elements).unwrap();
        // Force the contact nodes to the stop depth.
        let mut defl = DeflectionField::zeros(mesh.n_nodes());
        for &n in &mesh.contact_nodes {
            defl.dofs_mut()[2 * n] = -mesh.contact_stop;
        }
        let f1 = restoring_force(&device, &defl, &s).unwrap();
        assert!(!f1.is_empty());
        assert!(f1.iter().all(|&f| f > 0.0));
        // Halve the stop height: the restoring force halves (linearity).
        let mut spec = device.spec().clone();
        spec.contacts.stop_height *= 0.5;
        let device2 = validate_spec(spec).unwrap();
        let mesh2 = build_mesh(&device2, s.n_elements).unwrap();
        let mut defl2 = DeflectionField::zeros(mesh2.n_nodes());
        for &n in &mesh2.contact_nodes {
            defl2.dofs_mut()[2 * n] = -mesh2.contact_stop;
        }
        let f2 = restoring_force(&device2, &defl2, &s).unwrap();
        for (a, b) in f1.iter().zip(&f2) {
            assert!((a - 2.0 * b).abs() <= 1e-6 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn unstick_voltage_monotone_in_charge() {
        let device = device_07();
        let s = settings();
        let mut last = 0.0;
        for charge in [1.6, 2.0, 2.4] {
            let outcome = stuck_state(&device, charge, &AdhesionModel::default(), &s).unwrap();
            let StuckOutcome::Stuck(stuck) = outcome else {
                panic!("charge {charge} V should stick");
            };
            let v = unstick_voltage(&device, &stuck, 12.0, &s).unwrap();
            assert!(v >= last, "unstick {v} dropped below {last} at charge {charge}");
            last = v;
        }
    }

    #[test]
    fn min_pressure_mesh_invariant() {
        let device = validate_spec(presets::switch_1um()).unwrap();
        let arch = BeamArchetype::new(ArchetypeKind::FreeMembrane, device);
        let p200 = min_pressure_to_contact(
            &arch,
            1e-6,
            &SolverSettings {
                n_elements: 200,
                ..SolverSettings::default()
            },
        )
        .unwrap();
        let p400 = min_pressure_to_contact(
            &arch,
            1e-6,
            &SolverSettings {
                n_elements: 400,
                ..SolverSettings::default()
            },
        )
        .unwrap();
        assert!(((p400 - p200) / p200).abs() < 0.01, "{p200} vs {p400}");
    }

    #[test]
    fn cantilever_min_pressure_closed_form() {
        // p = (2/3) E t^3 g / L^4, width-independent.
        let device = validate_spec(presets::switch_1um()).unwrap();
        let arch = BeamArchetype::new(ArchetypeKind::Cantilever, device.clone());
        let p = min_pressure_to_contact(
            &arch,
            1e-6,
            &SolverSettings {
                n_elements: 200,
                ..SolverSettings::default()
            },
        )
        .unwrap();
        let e = device.material().youngs_modulus;
        let t = device.geometry().thickness;
        let l = device.geometry().length;
        let expect = (2.0 / 3.0) * e * t * t * t * 1e-6 / (l * l * l * l);
        assert!(((p - expect) / expect).abs() < 5e-3, "{p} vs {expect}");
    }

    #[test]
    fn min_pressure_doubles_with_gap() {
        let device = validate_spec(presets::switch_1um()).unwrap();
        let arch = BeamArchetype::new(ArchetypeKind::FreeMembrane, device);
        let s = settings();
        let p1 = min_pressure_to_contact(&arch, 1e-6, &s).unwrap();
        let p2 = min_pressure_to_contact(&arch, 2e-6, &s).unwrap();
        assert!((p2 / p1 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn archetype_ordering() {
        let device = validate_spec(presets::switch_1um()).unwrap();
        let s = settings();
        let p_cant = min_pressure_to_contact(
            &BeamArchetype::new(ArchetypeKind::Cantilever, device.clone()),
            1e-6,
            &s,
        )
        .unwrap();
        let p_mem = min_pressure_to_contact(
            &BeamArchetype::new(ArchetypeKind::FreeMembrane, device.clone()),
            1e-6,
            &s,
        )
        .unwrap();
        let p_cc = min_pressure_to_contact(
            &BeamArchetype::new(ArchetypeKind::ClampedClamped, device),
            1e-6,
            &s,
        )
        .unwrap();
        assert!(p_cant < p_mem, "{p_cant} vs {p_mem}");
        assert!(p_mem < p_cc, "{p_mem} vs {p_cc}");
    }

    #[test]
    fn restoring_ordering_across_archetypes() {
        // Hold the beam center at the same depth under the three support
        // styles; the upward pull ranks cantilever < membrane < clamped.
        // Equal geometry: the comparison uses a uniform planform.
        let mut spec = presets::switch_1um();
        spec.geometry.width_segments = vec![crate::device::WidthSegment {
            x_start: 0.0,
            x_end: spec.geometry.length,
            width: 250e-6,
        }];
        let device = validate_spec(spec).unwrap();
        let s = settings();
        let depth = 0.5e-6;
        let force_for = |kind: ArchetypeKind| -> f64 {
            let arch = BeamArchetype::new(kind, device.clone());
            let spec = arch.study_spec().unwrap();
            let mesh = build_mesh(&spec, s.n_elements).unwrap();
            let k = assemble(&mesh);
            let center = device.geometry().length / 2.0;
            let mid = mesh
                .nodes
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - center).abs().total_cmp(&(b.1 - center).abs()))
                .map(|(i, _)| i)
                .unwrap();
            let mut prescribed: Vec<(usize, f64)> =
                arch.clamped_dofs(&mesh).iter().map(|&d| (d, 0.0)).collect();
            prescribed.push((2 * mid, -depth));
            let sol =
                solve_with_prescribed(&k, &prescribed, &vec![0.0; mesh.n_dofs()], None).unwrap();
            -sol.reactions.last().unwrap().1
        };
        let f_cant = force_for(ArchetypeKind::Cantilever);
        let f_mem = force_for(ArchetypeKind::FreeMembrane);
        let f_cc = force_for(ArchetypeKind::ClampedClamped);
        assert!(f_cant < f_mem && f_mem < f_cc, "{f_cant} {f_mem} {f_cc}");
    }
}
