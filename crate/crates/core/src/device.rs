//! Device description, validation, and beam meshing.
//!
//! A device is a thin metallic membrane of piecewise-constant width resting
//! on two pillars, with electrode zones below it (internal zones between the
//! pillars, external zones on the overhangs) and ohmic contact bumps near the
//! center. All lengths are in meters, all fields SI.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Elastic properties of the membrane metal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialProps {
    /// Young's modulus in Pa.
    pub youngs_modulus: f64,
    /// Poisson ratio (only used when `plate_modulus` is set).
    pub poisson_ratio: f64,
    /// Use the plate modulus E/(1-nu^2) for the flexural rigidity instead
    /// of E. Off by default: the membrane is narrow relative to its length.
    #[serde(default)]
    pub plate_modulus: bool,
}

impl Default for MaterialProps {
    fn default() -> Self {
        // Electroplated gold; the calibrated presets override E within
        // the documented [55, 85] GPa range.
        Self {
            youngs_modulus: 78e9,
            poisson_ratio: 0.42,
            plate_modulus: false,
        }
    }
}

impl MaterialProps {
    /// Modulus entering the flexural rigidity EI.
    pub fn bending_modulus(&self) -> f64 {
        if self.plate_modulus {
            self.youngs_modulus / (1.0 - self.poisson_ratio * self.poisson_ratio)
        } else {
            self.youngs_modulus
        }
    }
}

/// One piece of the piecewise-constant width profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthSegment {
    pub x_start: f64,
    pub x_end: f64,
    pub width: f64,
}

/// Membrane planform and pillar layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    /// Total membrane length (m).
    pub length: f64,
    /// Membrane thickness (m).
    pub thickness: f64,
    /// Width profile; segments must tile [0, length] exactly.
    pub width_segments: Vec<WidthSegment>,
    /// Axial positions of the two support pillars, ascending.
    pub pillar_positions: [f64; 2],
}

/// Which side of the pillars an electrode zone lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectrodeKind {
    /// Between the pillars; presses the contact down (on-state).
    Internal,
    /// On the overhangs; levers the contact up (off-state / anti-stiction).
    External,
}

/// A fixed actuation electrode under the membrane, covered by a dielectric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeZone {
    pub x_start: f64,
    pub x_end: f64,
    pub kind: ElectrodeKind,
    /// Dielectric (insulation) thickness on top of the electrode (m).
    pub dielectric_thickness: f64,
    /// Relative permittivity of the dielectric.
    pub dielectric_rel_permittivity: f64,
}

/// Ohmic contact bumps between the membrane and the RF line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSpec {
    /// Axial positions of the contact bumps (m); must lie between the pillars.
    pub positions: Vec<f64>,
    /// Mechanical travel from the flat membrane down to the contact surface (m).
    pub stop_height: f64,
}

/// Full parameterized device.
///
/// `gap` is the air gap from the flat membrane underside to the top of the
/// electrode dielectric; the electrical gap adds `t_d/eps_r` on top of it
/// (see [`crate::electrostatic::effective_gap`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub material: MaterialProps,
    pub geometry: BeamGeometry,
    pub electrodes: Vec<ElectrodeZone>,
    pub gap: f64,
    pub contacts: ContactSpec,
}

/// Quantities derived during validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    /// Overhang-to-length ratio for the left and right pillar insets.
    pub s_over_l: [f64; 2],
    /// Total membrane area over internal electrode zones (m^2).
    pub internal_electrode_area: f64,
    /// Total membrane area over external electrode zones (m^2).
    pub external_electrode_area: f64,
}

/// A [`DeviceSpec`] that passed [`validate_spec`], plus derived quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedSpec {
    spec: DeviceSpec,
    derived: DerivedQuantities,
}

impl ValidatedSpec {
    pub fn spec(&self) -> &DeviceSpec {
        &self.spec
    }

    pub fn derived(&self) -> &DerivedQuantities {
        &self.derived
    }

    pub fn material(&self) -> &MaterialProps {
        &self.spec.material
    }

    pub fn geometry(&self) -> &BeamGeometry {
        &self.spec.geometry
    }

    pub fn electrodes(&self) -> &[ElectrodeZone] {
        &self.spec.electrodes
    }

    pub fn gap(&self) -> f64 {
        self.spec.gap
    }

    pub fn contacts(&self) -> &ContactSpec {
        &self.spec.contacts
    }
}

/// A single violated invariant found during validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("width segments do not tile [0, L] (problem near x = {x:.3e} m)")]
    OverlappingSegments { x: f64 },
    #[error("pillar at x = {x:.3e} m lies outside the beam (0, {length:.3e})")]
    PillarOutsideBeam { x: f64, length: f64 },
    #[error("{name} must be positive, got {value:.3e}")]
    NegativeDimension { name: &'static str, value: f64 },
    #[error("{kind:?} electrode [{x_start:.3e}, {x_end:.3e}] m on the wrong side of the pillars")]
    ElectrodeOnWrongSideOfPillar {
        kind: ElectrodeKind,
        x_start: f64,
        x_end: f64,
    },
    #[error("electrode zones overlap near x = {x:.3e} m")]
    OverlappingElectrodes { x: f64 },
    #[error("contact position x = {x:.3e} m lies outside the internal span")]
    ContactOutsideInternalSpan { x: f64 },
    #[error("contact stop height {stop:.3e} m exceeds the gap {gap:.3e} m")]
    StopHeightExceedsGap { stop: f64, gap: f64 },
    #[error("poisson ratio {value} outside [0, 0.5)")]
    InvalidPoissonRatio { value: f64 },
}

/// Errors from the device module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviceError {
    #[error("device spec invalid: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("requested {requested} elements, need at least {min}")]
    TooFewElements { requested: usize, min: usize },
    #[error("x = {x:.3e} m outside [0, {length:.3e}]")]
    OutOfRange { x: f64, length: f64 },
}

fn format_violations(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

const GEOM_TOL: f64 = 1e-12;

/// Checks every invariant of the device description and returns it with
/// derived quantities attached, or the full list of violations.
pub fn validate_spec(spec: DeviceSpec) -> Result<ValidatedSpec, DeviceError> {
    let mut violations = Vec::new();
    let g = &spec.geometry;

    if !(g.length > 0.0) {
        violations.push(Violation::NegativeDimension {
            name: "geometry.length",
            value: g.length,
        });
    }
    if !(g.thickness > 0.0) {
        violations.push(Violation::NegativeDimension {
            name: "geometry.thickness",
            value: g.thickness,
        });
    }
    if !(spec.gap > 0.0) {
        violations.push(Violation::NegativeDimension {
            name: "gap",
            value: spec.gap,
        });
    }
    if !(spec.material.youngs_modulus > 0.0) {
        violations.push(Violation::NegativeDimension {
            name: "material.youngs_modulus",
            value: spec.material.youngs_modulus,
        });
    }
    if !(0.0..0.5).contains(&spec.material.poisson_ratio) {
        violations.push(Violation::InvalidPoissonRatio {
            value: spec.material.poisson_ratio,
        });
    }

    // Width segments must tile [0, L] exactly, in order, with positive widths.
    if g.length > 0.0 {
        let tol = GEOM_TOL * g.length;
        let mut cursor = 0.0;
        for seg in &g.width_segments {
            if (seg.x_start - cursor).abs() > tol || seg.x_end <= seg.x_start {
                violations.push(Violation::OverlappingSegments { x: seg.x_start });
                break;
            }
            if !(seg.width > 0.0) {
                violations.push(Violation::NegativeDimension {
                    name: "width_segments.width",
                    value: seg.width,
                });
            }
            cursor = seg.x_end;
        }
        if violations
            .iter()
            .all(|v| !matches!(v, Violation::OverlappingSegments { .. }))
            && (cursor - g.length).abs() > tol
        {
            violations.push(Violation::OverlappingSegments { x: cursor });
        }
    }

    let [p1, p2] = g.pillar_positions;
    if !(p1 > 0.0 && p1 < g.length) {
        violations.push(Violation::PillarOutsideBeam {
            x: p1,
            length: g.length,
        });
    }
    if !(p2 > 0.0 && p2 < g.length) {
        violations.push(Violation::PillarOutsideBeam {
            x: p2,
            length: g.length,
        });
    }
    let pillars_ok = p1 > 0.0 && p2 < g.length && p1 < p2;
    if p1 >= p2 && violations.is_empty() {
        violations.push(Violation::PillarOutsideBeam {
            x: p2,
            length: g.length,
        });
    }

    // Electrode zones: inside the beam, disjoint, and on the declared side.
    let mut spans: Vec<(f64, f64)> = Vec::new();
    for z in &spec.electrodes {
        if z.x_end <= z.x_start || z.x_start < -GEOM_TOL || z.x_end > g.length * (1.0 + GEOM_TOL) {
            violations.push(Violation::ElectrodeOnWrongSideOfPillar {
                kind: z.kind,
                x_start: z.x_start,
                x_end: z.x_end,
            });
            continue;
        }
        if z.dielectric_thickness < 0.0 {
            violations.push(Violation::NegativeDimension {
                name: "electrodes.dielectric_thickness",
                value: z.dielectric_thickness,
            });
        }
        if z.dielectric_rel_permittivity < 1.0 {
            violations.push(Violation::NegativeDimension {
                name: "electrodes.dielectric_rel_permittivity",
                value: z.dielectric_rel_permittivity,
            });
        }
        if pillars_ok {
            let tol = GEOM_TOL * g.length;
            let inside = z.x_start >= p1 - tol && z.x_end <= p2 + tol;
            let outside = z.x_end <= p1 + tol || z.x_start >= p2 - tol;
            let ok = match z.kind {
                ElectrodeKind::Internal => inside,
                ElectrodeKind::External => outside,
            };
            if !ok {
                violations.push(Violation::ElectrodeOnWrongSideOfPillar {
                    kind: z.kind,
                    x_start: z.x_start,
                    x_end: z.x_end,
                });
            }
        }
        spans.push((z.x_start, z.x_end));
    }
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    for pair in spans.windows(2) {
        if pair[1].0 < pair[0].1 - GEOM_TOL * g.length {
            violations.push(Violation::OverlappingElectrodes { x: pair[1].0 });
        }
    }

    // Contacts: between the pillars, with the stop above the dielectric level.
    for &x in &spec.contacts.positions {
        if pillars_ok && !(x >= p1 && x <= p2) {
            violations.push(Violation::ContactOutsideInternalSpan { x });
        }
    }
    if !(spec.contacts.stop_height > 0.0) {
        violations.push(Violation::NegativeDimension {
            name: "contacts.stop_height",
            value: spec.contacts.stop_height,
        });
    } else if spec.gap > 0.0 && spec.contacts.stop_height > spec.gap * (1.0 + GEOM_TOL) {
        violations.push(Violation::StopHeightExceedsGap {
            stop: spec.contacts.stop_height,
            gap: spec.gap,
        });
    }

    if !violations.is_empty() {
        return Err(DeviceError::Invalid(violations));
    }

    let mut internal_area = 0.0;
    let mut external_area = 0.0;
    for z in &spec.electrodes {
        let area = zone_membrane_area(&spec.geometry, z.x_start, z.x_end);
        match z.kind {
            ElectrodeKind::Internal => internal_area += area,
            ElectrodeKind::External => external_area += area,
        }
    }
    let derived = DerivedQuantities {
        s_over_l: [p1 / g.length, (g.length - p2) / g.length],
        internal_electrode_area: internal_area,
        external_electrode_area: external_area,
    };
    Ok(ValidatedSpec { spec, derived })
}

fn zone_membrane_area(g: &BeamGeometry, x_start: f64, x_end: f64) -> f64 {
    g.width_segments
        .iter()
        .map(|seg| {
            let lo = seg.x_start.max(x_start);
            let hi = seg.x_end.min(x_end);
            if hi > lo {
                (hi - lo) * seg.width
            } else {
                0.0
            }
        })
        .sum()
}

/// Piecewise-constant width lookup. Boundaries resolve to the segment
/// starting there; `x = length` resolves to the last segment.
pub fn width_at(spec: &ValidatedSpec, x: f64) -> Result<f64, DeviceError> {
    let g = spec.geometry();
    if !(0.0..=g.length).contains(&x) {
        return Err(DeviceError::OutOfRange {
            x,
            length: g.length,
        });
    }
    for seg in &g.width_segments {
        if x < seg.x_end {
            return Ok(seg.width);
        }
    }
    Ok(g.width_segments.last().expect("validated non-empty").width)
}

/// One two-node beam element of the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    /// Left and right node indices (`n2 == n1 + 1`).
    pub n1: usize,
    pub n2: usize,
    /// Element length (m).
    pub length: f64,
    /// Membrane width over this element (m).
    pub width: f64,
    /// Flexural rigidity EI (N m^2).
    pub rigidity: f64,
    /// Index into the device's electrode list when the element lies under a zone.
    pub zone: Option<usize>,
}

/// 1D beam mesh with nodes at every pillar, electrode, width, and contact
/// boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    /// Strictly increasing node coordinates (m).
    pub nodes: Vec<f64>,
    pub elements: Vec<Element>,
    /// Node indices of the two pillars.
    pub pillar_nodes: [usize; 2],
    /// Node index of each ohmic contact bump, aligned with
    /// `contacts.positions`.
    pub contact_nodes: Vec<usize>,
    /// Air gap from the flat membrane to the dielectric top (m).
    pub gap: f64,
    /// Travel from the flat membrane down to the ohmic contact surface (m).
    pub contact_stop: f64,
    /// Per-zone dielectric properties `(thickness, rel_permittivity, kind)`,
    /// aligned with the device's electrode list.
    pub zone_dielectrics: Vec<(f64, f64, ElectrodeKind)>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    /// Nodes covered by electrode zones of the given kind (zone boundaries
    /// included).
    pub fn zone_nodes(&self, kind: ElectrodeKind) -> Vec<usize> {
        let mut flags = vec![false; self.n_nodes()];
        for e in &self.elements {
            if let Some(zi) = e.zone {
                if self.zone_dielectrics[zi].2 == kind {
                    flags[e.n1] = true;
                    flags[e.n2] = true;
                }
            }
        }
        flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect()
    }
}

/// Builds a mesh with a uniform target element size and forced nodes at
/// every pillar, electrode boundary, width-segment boundary, and contact
/// position. At least `n_elements` elements result.
pub fn build_mesh(spec: &ValidatedSpec, n_elements: usize) -> Result<Mesh, DeviceError> {
    const MIN_ELEMENTS: usize = 10;
    if n_elements < MIN_ELEMENTS {
        return Err(DeviceError::TooFewElements {
            requested: n_elements,
            min: MIN_ELEMENTS,
        });
    }
    let g = spec.geometry();
    let length = g.length;
    let snap = GEOM_TOL * length * 10.0;

    let mut breaks: Vec<f64> = vec![0.0, length];
    breaks.extend_from_slice(&g.pillar_positions);
    for seg in &g.width_segments {
        breaks.push(seg.x_start);
        breaks.push(seg.x_end);
    }
    for z in spec.electrodes() {
        breaks.push(z.x_start);
        breaks.push(z.x_end);
    }
    breaks.extend_from_slice(&spec.contacts().positions);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= snap);

    let target = length / n_elements as f64;
    let mut nodes: Vec<f64> = Vec::with_capacity(n_elements + breaks.len());
    for pair in breaks.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let span = hi - lo;
        // The epsilon keeps float noise in span/target from bumping the
        // count and breaking mirror symmetry between equal regions.
        let n_sub = ((span / target) - 1e-9).ceil().max(1.0) as usize;
        for k in 0..n_sub {
            nodes.push(lo + span * k as f64 / n_sub as f64);
        }
    }
    nodes.push(length);

    let modulus = spec.material().bending_modulus();
    let t3 = g.thickness * g.thickness * g.thickness;
    let elements: Vec<Element> = nodes
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let mid = 0.5 * (pair[0] + pair[1]);
            let width = width_at(spec, mid).expect("midpoint inside beam");
            let zone = spec
                .electrodes()
                .iter()
                .position(|z| mid >= z.x_start && mid <= z.x_end);
            Element {
                n1: i,
                n2: i + 1,
                length: pair[1] - pair[0],
                width,
                rigidity: modulus * width * t3 / 12.0,
                zone,
            }
        })
        .collect();

    let locate = |x: f64| -> usize {
        nodes
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
            .map(|(i, _)| i)
            .expect("non-empty mesh")
    };
    let pillar_nodes = [locate(g.pillar_positions[0]), locate(g.pillar_positions[1])];
    let contact_nodes = spec
        .contacts()
        .positions
        .iter()
        .map(|&x| locate(x))
        .collect();
    let zone_dielectrics = spec
        .electrodes()
        .iter()
        .map(|z| {
            (
                z.dielectric_thickness,
                z.dielectric_rel_permittivity,
                z.kind,
            )
        })
        .collect();

    Ok(Mesh {
        nodes,
        elements,
        pillar_nodes,
        contact_nodes,
        gap: spec.gap(),
        contact_stop: spec.contacts().stop_height,
        zone_dielectrics,
    })
}

pub mod presets {
    //! Calibrated reference devices.
    //!
    //! The published description fixes length, width, thickness, gap, the
    //! S/L ratio, and the 200 nm nitride; the electrode spans, H-shape widths,
    //! contact stop height, Young's modulus (within 55-85 GPa), and nitride
    //! permittivity (within 6-8) are declared assumptions fixed by one
    //! calibration run (see the repository README for the procedure).

    use super::*;

    /// Calibrated Young's modulus (Pa) for the electroplated membrane.
    pub const CALIBRATED_E: f64 = 61e9;
    /// Calibrated relative permittivity of the PECVD nitride.
    pub const CALIBRATED_EPS_R: f64 = 6.0;
    /// Nitride thickness (m).
    pub const DIELECTRIC_THICKNESS: f64 = 200e-9;

    /// Layout assumptions of the reference switch, exposed for what-if
    /// studies. Axial dimensions in meters on a half-beam; the full device
    /// is mirror-symmetric about the center.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Layout {
        pub youngs_modulus: f64,
        pub eps_r: f64,
        /// Width of the wide end (H vertical) segments.
        pub end_width: f64,
        /// End-segment extent from each beam end.
        pub end_segment: f64,
        /// Width of the narrow spine between the H verticals.
        pub spine_width: f64,
        /// Optional neck: a narrower strip just inside each pillar,
        /// `(extent from the pillar, width)`.
        pub neck: Option<(f64, f64)>,
        /// Optional narrowed strip over the internal pad zone,
        /// `(extent from the pillar, width)`; starts where the neck ends.
        pub pad_zone: Option<(f64, f64)>,
        /// External pad span on the overhang [from, to] measured from the end.
        pub external_pad: [f64; 2],
        /// Internal pad span measured from the pillar into the span.
        pub internal_pad: [f64; 2],
        /// Optional second internal pad strip per side, measured from the
        /// pillar; placed near the contact it dominates the down-state hold.
        pub keeper_pad: Option<[f64; 2]>,
        /// Ohmic bump offset from the beam center.
        pub contact_half_gap: f64,
    }

    impl Default for Layout {
        fn default() -> Self {
            let um = 1e-6;
            Self {
                youngs_modulus: CALIBRATED_E,
                eps_r: CALIBRATED_EPS_R,
                end_width: 250.0 * um,
                end_segment: 36.0 * um,
                spine_width: 34.0 * um,
                neck: Some((38.0 * um, 22.0 * um)),
                pad_zone: None,
                external_pad: [0.0, 35.0 * um],
                internal_pad: [38.0 * um, 62.0 * um],
                keeper_pad: Some([66.0 * um, 71.0 * um]),
                contact_half_gap: 3.0 * um,
            }
        }
    }

    /// Reference switch membrane: 360 um long, 1 um thick, H-shaped planform,
    /// pillars at a 0.1 inset ratio, two internal pads, two external pads,
    /// and a pair of ohmic contact bumps at the center.
    ///
    /// `gap` is the air gap to the dielectric top; `stop_height` the travel
    /// to the ohmic contact surface.
    pub fn custom_switch(layout: &Layout, gap: f64, stop_height: f64) -> DeviceSpec {
        let um = 1e-6;
        let length = 360.0 * um;
        let pillar = 36.0 * um;
        let dielectric = |x_start: f64, x_end: f64, kind: ElectrodeKind| ElectrodeZone {
            x_start,
            x_end,
            kind,
            dielectric_thickness: DIELECTRIC_THICKNESS,
            dielectric_rel_permittivity: layout.eps_r,
        };
        DeviceSpec {
            material: MaterialProps {
                youngs_modulus: layout.youngs_modulus,
                poisson_ratio: 0.42,
                plate_modulus: false,
            },
            geometry: BeamGeometry {
                length,
                thickness: 1.0 * um,
                width_segments: {
                    // Half-beam width stages (absolute upper bound, width),
                    // mirrored about the center.
                    let mut stages: Vec<(f64, f64)> = vec![(layout.end_segment, layout.end_width)];
                    if let Some((extent, width)) = layout.neck {
                        stages.push((pillar + extent, width));
                    }
                    if let Some((extent, width)) = layout.pad_zone {
                        stages.push((pillar + extent, width));
                    }
                    stages.push((length / 2.0, layout.spine_width));

                    let mut segments = Vec::new();
                    let mut cursor = 0.0;
                    for &(to, width) in &stages {
                        segments.push(WidthSegment {
                            x_start: cursor,
                            x_end: to,
                            width,
                        });
                        cursor = to;
                    }
                    let mut mirrored = Vec::new();
                    let mut prev = 0.0;
                    for &(to, width) in &stages {
                        mirrored.push(WidthSegment {
                            x_start: length - to,
                            x_end: length - prev,
                            width,
                        });
                        prev = to;
                    }
                    mirrored.reverse();
                    segments.extend(mirrored);
                    segments
                },
                pillar_positions: [pillar, length - pillar],
            },
            electrodes: {
                let mut zones = vec![
                    dielectric(
                        layout.external_pad[0],
                        layout.external_pad[1],
                        ElectrodeKind::External,
                    ),
                    dielectric(
                        length - layout.external_pad[1],
                        length - layout.external_pad[0],
                        ElectrodeKind::External,
                    ),
                    dielectric(
                        pillar + layout.internal_pad[0],
                        pillar + layout.internal_pad[1],
                        ElectrodeKind::Internal,
                    ),
                    dielectric(
                        length - pillar - layout.internal_pad[1],
                        length - pillar - layout.internal_pad[0],
                        ElectrodeKind::Internal,
                    ),
                ];
                if let Some([from, to]) = layout.keeper_pad {
                    zones.push(dielectric(
                        pillar + from,
                        pillar + to,
                        ElectrodeKind::Internal,
                    ));
                    zones.push(dielectric(
                        length - pillar - to,
                        length - pillar - from,
                        ElectrodeKind::Internal,
                    ));
                }
                zones
            },
            gap,
            contacts: ContactSpec {
                positions: vec![
                    length / 2.0 - layout.contact_half_gap,
                    length / 2.0 + layout.contact_half_gap,
                ],
                stop_height,
            },
        }
    }

    /// Reference switch at the given gap and stop height with the calibrated
    /// layout.
    pub fn switch_device(gap: f64, stop_height: f64) -> DeviceSpec {
        custom_switch(&Layout::default(), gap, stop_height)
    }

    /// 1 um-gap device used for the ratio sweep and lever-effect figures.
    pub fn switch_1um() -> DeviceSpec {
        switch_device(1.0e-6, 0.56e-6)
    }

    /// 0.7 um-gap device used for pull-in/pull-out and anti-stiction studies.
    pub fn switch_07um() -> DeviceSpec {
        switch_device(0.7e-6, 0.44e-6)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn valid_default() -> DeviceSpec {
        presets::switch_1um()
    }

    #[test]
    fn default_device_validates_with_ratio() {
        let v = validate_spec(valid_default()).unwrap();
        assert!((v.derived().s_over_l[0] - 0.1).abs() < 1e-12);
        assert!((v.derived().s_over_l[1] - 0.1).abs() < 1e-12);
        assert!(v.derived().internal_electrode_area > 0.0);
        assert!(v.derived().external_electrode_area > 0.0);
    }

    #[test]
    fn pillar_outside_beam_rejected() {
        let mut spec = valid_default();
        spec.geometry.pillar_positions[1] = 400e-6;
        let err = validate_spec(spec).unwrap_err();
        match err {
            DeviceError::Invalid(vs) => {
                assert!(vs
                    .iter()
                    .any(|v| matches!(v, Violation::PillarOutsideBeam { .. })));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn zero_gap_rejected() {
        let mut spec = valid_default();
        spec.gap = 0.0;
        let err = validate_spec(spec).unwrap_err();
        match err {
            DeviceError::Invalid(vs) => {
                assert!(vs
                    .iter()
                    .any(|v| matches!(v, Violation::NegativeDimension { name: "gap", .. })));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn all_violations_reported_together() {
        let mut spec = valid_default();
        spec.gap = -1.0;
        spec.geometry.thickness = 0.0;
        spec.geometry.pillar_positions[0] = -5e-6;
        match validate_spec(spec).unwrap_err() {
            DeviceError::Invalid(vs) => assert!(vs.len() >= 3, "got {vs:?}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn electrode_side_enforced() {
        let mut spec = valid_default();
        // Internal electrode moved onto the left overhang.
        spec.electrodes[2].x_start = 2e-6;
        spec.electrodes[2].x_end = 30e-6;
        match validate_spec(spec).unwrap_err() {
            DeviceError::Invalid(vs) => assert!(vs
                .iter()
                .any(|v| matches!(v, Violation::ElectrodeOnWrongSideOfPillar { .. }))),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn validation_is_idempotent() {
        let v1 = validate_spec(valid_default()).unwrap();
        let v2 = validate_spec(v1.spec().clone()).unwrap();
        assert_eq!(v1, v2);
    }

    #[test]
    fn width_lookup_boundaries() {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
        let v = validate_spec(valid_default()).unwrap();
        // Spine at the center, neck inside the pillars, wide ends.
        assert!(close(width_at(&v, 180e-6).unwrap(), 34e-6));
        assert!(close(width_at(&v, 50e-6).unwrap(), 22e-6));
        assert!(close(width_at(&v, 0.0).unwrap(), 250e-6));
        // Boundary resolves to the segment starting there.
        assert!(close(width_at(&v, 36e-6).unwrap(), 22e-6));
        // Right end resolves to the last segment.
        assert!(close(width_at(&v, v.geometry().length).unwrap(), 250e-6));
        assert!(matches!(
            width_at(&v, -1e-6),
            Err(DeviceError::OutOfRange { .. })
        ));
    }

    #[test]
    fn uniform_width_reported_everywhere() {
        let mut spec = valid_default();
        spec.geometry.width_segments = vec![WidthSegment {
            x_start: 0.0,
            x_end: 360e-6,
            width: 250e-6,
        }];
        let v = validate_spec(spec).unwrap();
        assert_eq!(width_at(&v, 180e-6).unwrap(), 250e-6);
    }

    #[test]
    fn mesh_element_count_and_forced_nodes() {
        let v = validate_spec(valid_default()).unwrap();
        let mesh = build_mesh(&v, 360).unwrap();
        assert!(mesh.elements.len() >= 360);
        assert!(mesh.n_nodes() >= 361);
        // Pillars sit exactly on nodes.
        for (i, &p) in mesh.pillar_nodes.iter().zip(&v.geometry().pillar_positions) {
            assert!((mesh.nodes[*i] - p).abs() < 1e-15);
        }
        // Contact positions sit exactly on nodes.
        for (&ni, &x) in mesh.contact_nodes.iter().zip(&v.contacts().positions) {
            assert!((mesh.nodes[ni] - x).abs() < 1e-15);
        }
    }

    #[test]
    fn coarse_mesh_still_carries_pillar_node() {
        let v = validate_spec(valid_default()).unwrap();
        let mesh = build_mesh(&v, 10).unwrap();
        let p = v.geometry().pillar_positions[0];
        assert!(mesh.nodes.iter().any(|&x| (x - p).abs() < 1e-15));
    }

    #[test]
    fn too_few_elements_rejected() {
        let v = validate_spec(valid_default()).unwrap();
        assert!(matches!(
            build_mesh(&v, 2),
            Err(DeviceError::TooFewElements { .. })
        ));
    }

    #[test]
    fn element_lengths_sum_to_beam_length() {
        let v = validate_spec(valid_default()).unwrap();
        for n in [10, 37, 200] {
            let mesh = build_mesh(&v, n).unwrap();
            let total: f64 = mesh.elements.iter().map(|e| e.length).sum();
            let l = v.geometry().length;
            assert!((total - l).abs() <= 1e-12 * l, "n={n}: {total} vs {l}");
        }
    }

    #[test]
    fn refinement_keeps_boundary_nodes() {
        let v = validate_spec(valid_default()).unwrap();
        let coarse = build_mesh(&v, 50).unwrap();
        let fine = build_mesh(&v, 100).unwrap();
        let mut forced: Vec<f64> = v
            .electrodes()
            .iter()
            .flat_map(|z| [z.x_start, z.x_end])
            .collect();
        forced.extend_from_slice(&v.geometry().pillar_positions);
        forced.extend_from_slice(&v.contacts().positions);
        for b in forced {
            assert!(coarse.nodes.iter().any(|&x| (x - b).abs() < 1e-15));
            assert!(fine.nodes.iter().any(|&x| (x - b).abs() < 1e-15));
        }
    }

    #[test]
    fn zone_membership_assigned_to_elements() {
        let v = validate_spec(valid_default()).unwrap();
        let mesh = build_mesh(&v, 200).unwrap();
        let covered: f64 = mesh
            .elements
            .iter()
            .filter(|e| e.zone.is_some())
            .map(|e| e.length)
            .sum();
        let expect: f64 = v.electrodes().iter().map(|z| z.x_end - z.x_start).sum();
        assert!((covered - expect).abs() < 1e-12);
    }
}
