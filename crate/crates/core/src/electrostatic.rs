//! Gap-dependent electrostatic traction on electrode zones.
//!
//! The membrane and each electrode form a parallel-plate capacitor in series
//! with the electrode dielectric. The traction per unit length on an element
//! of width w at effective gap g_e under voltage V is
//! `f = -eps0 * w * V^2 / (2 g_e^2)` (negative = toward the substrate), and
//! its derivative with respect to approach is `2|f|/g_e`, the softening term
//! of the Newton tangent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{ElectrodeKind, Mesh};
use crate::fem::DeflectionField;

/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.8541878128e-12;

/// Electrode voltages plus trapped-charge offsets.
///
/// Charging is modeled purely as a voltage offset added to the drive before
/// squaring, the same surrogate the device studies use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuationState {
    pub v_internal: f64,
    pub v_external: f64,
    #[serde(default)]
    pub v_charge_internal: f64,
    #[serde(default)]
    pub v_charge_external: f64,
}

impl Default for ActuationState {
    fn default() -> Self {
        Self::rest()
    }
}

impl ActuationState {
    /// All voltages zero.
    pub fn rest() -> Self {
        Self {
            v_internal: 0.0,
            v_external: 0.0,
            v_charge_internal: 0.0,
            v_charge_external: 0.0,
        }
    }

    pub fn internal(v: f64) -> Self {
        Self {
            v_internal: v,
            ..Self::rest()
        }
    }

    pub fn external(v: f64) -> Self {
        Self {
            v_external: v,
            ..Self::rest()
        }
    }

    /// Effective voltage seen by a zone of the given kind.
    pub fn effective(&self, kind: ElectrodeKind) -> f64 {
        match kind {
            ElectrodeKind::Internal => self.v_internal + self.v_charge_internal,
            ElectrodeKind::External => self.v_external + self.v_charge_external,
        }
    }

    /// Copy with the drive voltage of the selected electrodes replaced.
    pub fn with_drive(&self, kind: ElectrodeKind, v: f64) -> Self {
        let mut s = *self;
        match kind {
            ElectrodeKind::Internal => s.v_internal = v,
            ElectrodeKind::External => s.v_external = v,
        }
        s
    }
}

/// Per-element electrostatic loading, sampled at element midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct TractionProfile {
    /// Traction per element (N/m), zero outside electrode zones, <= 0
    /// everywhere (attraction only).
    pub traction: Vec<f64>,
    /// Derivative of |traction| with respect to approach (N/m^2), >= 0.
    pub stiffness_density: Vec<f64>,
}

impl TractionProfile {
    /// Total transverse force (N), negative toward the substrate.
    pub fn total_force(&self, mesh: &Mesh) -> f64 {
        self.traction
            .iter()
            .zip(&mesh.elements)
            .map(|(q, e)| q * e.length)
            .sum()
    }
}

/// Errors from electrostatic evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElectrostaticError {
    #[error("relative permittivity {value} < 1")]
    InvalidPermittivity { value: f64 },
    #[error("effective gap is not positive ({value:.3e} m)")]
    ZeroGap { value: f64 },
    #[error(
        "membrane penetrates the dielectric at x = {x:.3e} m (depth {depth:.3e} m > gap {gap:.3e} m) without contact handling"
    )]
    PenetrationWithoutContact { x: f64, depth: f64, gap: f64 },
}

/// Electrical gap of the air gap in series with the dielectric:
/// `g_e = g_mech + t_d / eps_r`.
pub fn effective_gap(g_mech: f64, t_d: f64, eps_r: f64) -> Result<f64, ElectrostaticError> {
    if eps_r < 1.0 {
        return Err(ElectrostaticError::InvalidPermittivity { value: eps_r });
    }
    Ok(g_mech + t_d / eps_r)
}

/// Parallel-plate traction per unit length (N/m), negative toward the
/// electrode.
pub fn traction(v_eff: f64, g_e: f64, width: f64) -> Result<f64, ElectrostaticError> {
    if !(g_e > 0.0) {
        return Err(ElectrostaticError::ZeroGap { value: g_e });
    }
    Ok(-EPS0 * width * v_eff * v_eff / (2.0 * g_e * g_e))
}

/// Derivative of |traction| with respect to approach toward the electrode:
/// `2 |f| / g_e` (N/m^2, >= 0).
pub fn traction_jacobian(v_eff: f64, g_e: f64, width: f64) -> Result<f64, ElectrostaticError> {
    let f = traction(v_eff, g_e, width)?;
    Ok(2.0 * f.abs() / g_e)
}

/// First-order fringing-field correction factor for a plate of width w at
/// gap g_e. Optional: the default devices have width >> gap, where the
/// correction stays below 1%.
pub fn fringing_factor(g_e: f64, width: f64) -> f64 {
    1.0 + 0.65 * g_e / width
}

/// Options for [`build_traction_opts`].
#[derive(Debug, Clone, Copy, Default)]
pub struct TractionOptions {
    /// Apply the fringing-field factor to every element traction.
    pub fringing: bool,
    /// Clamp the air gap at zero over electrode zones instead of failing;
    /// used by the contact-handling solver where the dielectric face is a
    /// declared stop.
    pub clamp_at_dielectric: bool,
}

/// Smoothing length of the air-gap clamp (m). The clamp `max(g, 0)` is
/// replaced by `(g + hypot(g, delta))/2` so the traction stays continuously
/// differentiable through dielectric touch-down; one nanometer is far below
/// every geometric scale of the devices.
const GAP_SMOOTHING: f64 = 1e-9;

/// Per-element traction of the deflected membrane, sampled at element
/// midpoints; strict mode (no contact handling declared).
pub fn build_traction(
    mesh: &Mesh,
    state: &ActuationState,
    deflection: &DeflectionField,
) -> Result<TractionProfile, ElectrostaticError> {
    build_traction_opts(mesh, state, deflection, TractionOptions::default())
}

/// Per-element traction with explicit options.
pub fn build_traction_opts(
    mesh: &Mesh,
    state: &ActuationState,
    deflection: &DeflectionField,
    opts: TractionOptions,
) -> Result<TractionProfile, ElectrostaticError> {
    let n = mesh.elements.len();
    let mut traction_per_element = vec![0.0; n];
    let mut stiffness = vec![0.0; n];
    for (i, e) in mesh.elements.iter().enumerate() {
        let Some(zi) = e.zone else { continue };
        let (t_d, eps_r, kind) = mesh.zone_dielectrics[zi];
        let v = state.effective(kind);
        if v == 0.0 {
            continue;
        }
        let depth = -deflection.w_mid(e.n1, e.length);
        let g_mech = mesh.gap - depth;
        // Approach sensitivity of the (possibly clamped) air gap.
        let (g_air, dg) = if opts.clamp_at_dielectric {
            let h = (g_mech * g_mech + GAP_SMOOTHING * GAP_SMOOTHING).sqrt();
            (0.5 * (g_mech + h), 0.5 * (1.0 + g_mech / h))
        } else {
            if g_mech <= 0.0 {
                let x = 0.5 * (mesh.nodes[e.n1] + mesh.nodes[e.n2]);
                return Err(ElectrostaticError::PenetrationWithoutContact {
                    x,
                    depth,
                    gap: mesh.gap,
                });
            }
            (g_mech, 1.0)
        };
        let mut g_e = effective_gap(g_air, t_d, eps_r)?;
        if g_e < 1e-9 {
            // Zone without dielectric driven into contact; keep the force
            // finite with a nanometer floor.
            g_e = 1e-9;
        }
        let mut q = traction(v, g_e, e.width)?;
        if opts.fringing {
            q *= fringing_factor(g_e, e.width);
        }
        traction_per_element[i] = q;
        stiffness[i] = {
            let mut j = traction_jacobian(v, g_e, e.width)?;
            if opts.fringing {
                // d/dg of f*(1 + 0.65 g/w) keeps the dominant 1/g^3 term;
                // the small correction term is folded in exactly.
                j = j * fringing_factor(g_e, e.width) - q.abs() * 0.65 / e.width;
            }
            // On (and past) the dielectric stop the gap stops shrinking
            // with approach and the softening fades out smoothly.
            j * dg
        };
    }
    Ok(TractionProfile {
        traction: traction_per_element,
        stiffness_density: stiffness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{presets, validate_spec};
    use proptest::prelude::*;

    fn mesh_1um() -> Mesh {
        // Pin the dielectric to 200 nm / eps_r 7.5 so the hand values below
        // stay valid whatever the calibrated preset uses.
        let mut spec = presets::switch_1um();
        for z in &mut spec.electrodes {
            z.dielectric_thickness = 200e-9;
            z.dielectric_rel_permittivity = 7.5;
        }
        let v = validate_spec(spec).unwrap();
        crate::device::build_mesh(&v, 120).unwrap()
    }

    #[test]
    fn effective_gap_examples() {
        assert_eq!(effective_gap(1e-6, 0.0, 1.0).unwrap(), 1e-6);
        let g = effective_gap(1e-6, 200e-9, 7.5).unwrap();
        assert!((g - 1.0266667e-6).abs() < 1e-12);
        let collapsed = effective_gap(0.0, 200e-9, 7.5).unwrap();
        assert!((collapsed - 2.6666667e-8).abs() < 1e-14);
        assert!(matches!(
            effective_gap(1e-6, 200e-9, 0.5),
            Err(ElectrostaticError::InvalidPermittivity { .. })
        ));
    }

    #[test]
    fn traction_hand_value() {
        assert_eq!(traction(0.0, 1e-6, 250e-6).unwrap(), 0.0);
        let f = traction(1.0, 1e-6, 250e-6).unwrap();
        assert!(f < 0.0);
        assert!(((-f) - 1.1067734766e-3).abs() < 1e-9 * 1.1e-3);
        // V^2 law
        let f2 = traction(2.0, 1e-6, 250e-6).unwrap();
        assert!((f2 / f - 4.0).abs() < 1e-12);
        assert!(matches!(
            traction(1.0, 0.0, 250e-6),
            Err(ElectrostaticError::ZeroGap { .. })
        ));
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let v = 1.0;
        let g = 1e-6;
        let w = 250e-6;
        let j = traction_jacobian(v, g, w).unwrap();
        let h = g * 1e-6;
        // Traction toward the electrode grows as the gap shrinks.
        let fd = (traction(v, g - h, w).unwrap().abs() - traction(v, g + h, w).unwrap().abs())
            / (2.0 * h);
        assert!(((j - fd) / fd).abs() < 1e-6, "{j:.6e} vs {fd:.6e}");
        assert_eq!(traction_jacobian(0.0, g, w).unwrap(), 0.0);
        assert!(j >= 0.0);
    }

    #[test]
    fn jacobian_finite_difference_grid() {
        for &v in &[0.5, 1.0, 3.5, 10.0] {
            for &g in &[0.3e-6, 0.7e-6, 1e-6, 2e-6] {
                let j = traction_jacobian(v, g, 250e-6).unwrap();
                let h = g * 1e-5;
                let fd = (traction(v, g - h, 250e-6).unwrap().abs()
                    - traction(v, g + h, 250e-6).unwrap().abs())
                    / (2.0 * h);
                assert!(((j - fd) / fd).abs() < 1e-6, "V={v}, g={g}");
            }
        }
    }

    #[test]
    fn flat_membrane_zero_voltage_profile() {
        let mesh = mesh_1um();
        let flat = DeflectionField::zeros(mesh.n_nodes());
        let p = build_traction(&mesh, &ActuationState::rest(), &flat).unwrap();
        assert!(p.traction.iter().all(|&q| q == 0.0));
        assert!(p.stiffness_density.iter().all(|&k| k == 0.0));
    }

    #[test]
    fn flat_membrane_internal_pressure_value() {
        let mesh = mesh_1um();
        let flat = DeflectionField::zeros(mesh.n_nodes());
        let p = build_traction(&mesh, &ActuationState::internal(3.5), &flat).unwrap();
        let g_e = effective_gap(1e-6, 200e-9, 7.5).unwrap();
        let expect_pressure = EPS0 * 3.5 * 3.5 / (2.0 * g_e * g_e);
        assert!((expect_pressure - 51.45).abs() < 0.01, "{expect_pressure}");
        for (e, &q) in mesh.elements.iter().zip(&p.traction) {
            match e.zone {
                Some(zi) if mesh.zone_dielectrics[zi].2 == ElectrodeKind::Internal => {
                    let pressure = -q / e.width;
                    assert!(((pressure - expect_pressure) / expect_pressure).abs() < 1e-9);
                }
                _ => assert_eq!(q, 0.0),
            }
        }
    }

    #[test]
    fn charging_offset_equivalent_to_drive() {
        let mesh = mesh_1um();
        let flat = DeflectionField::zeros(mesh.n_nodes());
        let a = build_traction(&mesh, &ActuationState::internal(2.0), &flat).unwrap();
        let b = build_traction(
            &mesh,
            &ActuationState {
                v_internal: 0.0,
                v_charge_internal: 2.0,
                ..ActuationState::rest()
            },
            &flat,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn penetration_without_contact_rejected() {
        let mesh = mesh_1um();
        let mut defl = DeflectionField::zeros(mesh.n_nodes());
        for d in (0..mesh.n_dofs()).step_by(2) {
            defl.dofs_mut()[d] = -1.2 * mesh.gap;
        }
        let err = build_traction(&mesh, &ActuationState::internal(1.0), &defl).unwrap_err();
        assert!(matches!(
            err,
            ElectrostaticError::PenetrationWithoutContact { .. }
        ));
        // Clamped mode keeps the force finite at the dielectric floor.
        let p = build_traction_opts(
            &mesh,
            &ActuationState::internal(1.0),
            &defl,
            TractionOptions {
                clamp_at_dielectric: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(p.traction.iter().all(|&q| q.is_finite()));
    }

    #[test]
    fn energy_consistency_over_grid() {
        // traction = -d/dg of (1/2) C'(g) V^2 with C' = eps0 * w / g_e.
        let w = 250e-6;
        let t_d = 200e-9;
        let eps_r = 7.5;
        for &v in &[0.5, 2.0, 5.0] {
            for &g in &[0.4e-6, 1e-6, 1.5e-6] {
                let g_e = effective_gap(g, t_d, eps_r).unwrap();
                let f = traction(v, g_e, w).unwrap();
                let h = g * 1e-6;
                let energy = |gm: f64| {
                    let ge = effective_gap(gm, t_d, eps_r).unwrap();
                    0.5 * EPS0 * w / ge * v * v
                };
                let dw_dg = (energy(g + h) - energy(g - h)) / (2.0 * h);
                // Attraction pulls toward smaller gap: f = +dW/dg with the
                // downward sign convention.
                assert!(((f - dw_dg) / dw_dg).abs() < 1e-6, "V={v} g={g}");
            }
        }
    }

    proptest! {
        #[test]
        fn traction_zero_off_electrodes_any_state(
            vi in -10.0f64..10.0,
            ve in -10.0f64..10.0,
            qi in -3.0f64..3.0,
            qe in -3.0f64..3.0,
        ) {
            let mesh = mesh_1um();
            let flat = DeflectionField::zeros(mesh.n_nodes());
            let st = ActuationState {
                v_internal: vi,
                v_external: ve,
                v_charge_internal: qi,
                v_charge_external: qe,
            };
            let p = build_traction(&mesh, &st, &flat).unwrap();
            for (e, &q) in mesh.elements.iter().zip(&p.traction) {
                if e.zone.is_none() {
                    prop_assert_eq!(q, 0.0);
                }
                prop_assert!(q <= 0.0);
            }
        }

        #[test]
        fn charging_additivity(v in 0.0f64..8.0, q in -4.0f64..4.0) {
            let mesh = mesh_1um();
            let flat = DeflectionField::zeros(mesh.n_nodes());
            let a = build_traction(
                &mesh,
                &ActuationState { v_internal: v, v_charge_internal: q, ..ActuationState::rest() },
                &flat,
            ).unwrap();
            let b = build_traction(&mesh, &ActuationState::internal(v + q), &flat).unwrap();
            for (x, y) in a.traction.iter().zip(&b.traction) {
                prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-30));
            }
        }
    }
}
