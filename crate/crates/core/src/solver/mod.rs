//! Nonlinear electro-mechanical equilibrium and voltage continuation.
//!
//! Newton iteration on `K u - f_es(u) - f_contact(u) = 0` with penalty
//! contact (active-set, optionally adhesive) and the electrostatic softening
//! folded into a symmetric banded tangent. Pull-in is located by an ascending
//! voltage scan with warm starts and bisection of the first stable/unstable
//! bracket; pull-out by a descending scan until the contact set empties.

pub(crate) mod fold;
pub mod lumped;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{
    build_mesh, validate_spec, DeviceError, DeviceSpec, ElectrodeKind, Mesh, ValidatedSpec,
};
use crate::electrostatic::{
    build_traction_opts, ActuationState, ElectrostaticError, TractionOptions,
};
use crate::fem::{
    add_element, assemble, assemble_traction_load, DeflectionField, FemError, SymBandMatrix,
};
use fold::{bracket_fold, bracket_release, FoldSystem, ReleaseOutcome};

/// Voltage cap for scans that must cross pull-in on their own (pull-out
/// preparation, stuck-state drives).
const DRIVE_SCAN_VMAX: f64 = 60.0;

/// Newton step cap as a fraction of the gap; limits overshoot when the
/// iterate drops onto the contacted branch.
const STEP_CAP_FRACTION: f64 = 0.15;

/// Minimum fall-mode push as a fraction of the gap. Just past the fold the
/// force imbalance (and with it the raw elastic step) vanishes, so the push
/// is stretched to at least this length to traverse the fall in a bounded
/// number of iterations.
const FALL_MIN_PUSH_FRACTION: f64 = 0.05;

/// Displacement jump that counts as a pull-in signal, as a fraction of the gap.
const JUMP_FRACTION: f64 = 0.10;

/// Absolute floor for the load norm in the relative residual test (N).
const LOAD_NORM_FLOOR: f64 = 1e-18;

/// Safety factor on the floating-point rounding bound of the residual.
const ROUNDING_SAFETY: f64 = 32.0;

/// Settings shared by every nonlinear solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Relative residual tolerance for Newton convergence.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Voltage scan step (V).
    pub v_step: f64,
    /// Bisection width for pull-in/pull-out brackets (V).
    pub bisect_tol: f64,
    /// Penalty spring per contact node (N/m).
    pub penalty_stiffness: f64,
    /// Minimum element count of the beam mesh.
    pub n_elements: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            newton_tol: 1e-6,
            max_newton_iters: 80,
            v_step: 0.05,
            bisect_tol: 1e-3,
            penalty_stiffness: 1e4,
            n_elements: 240,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("newton_tol", self.newton_tol),
            ("v_step", self.v_step),
            ("bisect_tol", self.bisect_tol),
            ("penalty_stiffness", self.penalty_stiffness),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(SolverError::BadSettings(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_newton_iters == 0 || self.n_elements == 0 {
            return Err(SolverError::BadSettings(
                "iteration and element counts must be positive".into(),
            ));
        }
        if self.bisect_tol >= self.v_step {
            return Err(SolverError::BadSettings(format!(
                "bisect_tol {} must be smaller than v_step {}",
                self.bisect_tol, self.v_step
            )));
        }
        Ok(())
    }
}

/// Errors from the coupled solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("newton did not converge at V = {voltage:.4} V ({iterations} iterations, residual {residual:.3e})")]
    NoConvergence {
        voltage: f64,
        iterations: usize,
        residual: f64,
    },
    #[error("no pull-in below {v_max} V")]
    NoPullInBelowVmax { v_max: f64 },
    #[error("contact never releases above 0 V (stuck state)")]
    NeverReleases,
    #[error("no contacted equilibrium reachable near pull-in")]
    NoContactedState,
    #[error("voltage grid must be ascending")]
    NonAscendingGrid,
    #[error("ratio {ratio} outside (0, 0.5)")]
    InvalidRatio { ratio: f64 },
    #[error("invalid solver settings: {0}")]
    BadSettings(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Electrostatic(#[from] ElectrostaticError),
}

/// What a contact-capable node rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopKind {
    /// Ohmic bump over the RF line.
    Ohmic,
    /// Dielectric face of an electrode zone.
    Dielectric(ElectrodeKind),
}

#[derive(Debug, Clone)]
pub(crate) struct Stop {
    pub node: usize,
    /// Downward travel from the flat membrane to the stop surface (m).
    pub depth: f64,
    pub kind: StopKind,
}

/// Converged (or last-iterate) equilibrium of the coupled system.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub deflection: DeflectionField,
    /// Mesh node indices currently in contact, ascending.
    pub contact_nodes: Vec<usize>,
    /// Contact normal force per contact node (N); negative values can only
    /// appear under an adhesive contact model.
    pub contact_forces: Vec<f64>,
    /// Stop kind per contact node.
    pub contact_kinds: Vec<StopKind>,
    /// Transverse reaction at the two pillars (N), positive pushing up.
    pub pin_reactions: [f64; 2],
    pub converged: bool,
    pub iterations: usize,
    /// Euclidean norm of the out-of-balance force at the last iterate (N).
    pub residual_norm: f64,
    /// Norm of the applied loads at the last iterate (N); the convergence
    /// test is `residual_norm <= newton_tol * load_norm` (plus a tiny floor).
    pub load_norm: f64,
    /// Whether the constrained tangent at the solution is positive definite.
    pub tangent_positive_definite: bool,
    /// A pillar reaction pulls the membrane down; a real (unilateral) pillar
    /// would let it lift off. Reported as a warning, not modeled.
    pub pin_liftoff: bool,
}

impl EquilibriumResult {
    /// Largest |w| over nodes, signed (downward negative).
    pub fn peak_displacement(&self) -> f64 {
        self.deflection.peak_signed()
    }

    /// Sum of ohmic contact forces (N).
    pub fn ohmic_contact_force(&self) -> f64 {
        self.contact_nodes
            .iter()
            .zip(&self.contact_forces)
            .zip(&self.contact_kinds)
            .filter(|&(_, k)| *k == StopKind::Ohmic)
            .map(|((_, f), _)| f)
            .sum()
    }
}

/// Pull-in search result.
#[derive(Debug, Clone)]
pub struct PullInResult {
    pub v_pullin: f64,
    /// `(v_stable, v_unstable)` bracket, width <= `bisect_tol`.
    pub bracket: (f64, f64),
    pub deflection_at_onset: DeflectionField,
    /// Peak displacement at onset, signed (downward negative).
    pub peak_displacement: f64,
}

/// Pull-out (release) search result.
#[derive(Debug, Clone)]
pub struct PullOutResult {
    pub v_pullout: f64,
    /// `(v_released, v_contacted)` bracket, width <= `bisect_tol`.
    pub bracket: (f64, f64),
}

/// One point of a voltage trace.
#[derive(Debug, Clone, Copy)]
pub struct CvPoint {
    pub voltage: f64,
    /// Peak displacement, signed (downward negative).
    pub peak_displacement: f64,
    /// Fraction of contact-capable nodes currently in contact.
    pub contact_fraction: f64,
}

/// One row of the ratio sweep.
#[derive(Debug, Clone)]
pub struct RatioPoint {
    pub ratio: f64,
    /// `(v_pullin_external, peak upward displacement of the collapsed state)`.
    pub result: Result<(f64, f64), SolverError>,
}

/// Warm-startable solver state: deflection plus contact attachment flags.
#[derive(Debug, Clone)]
pub(crate) struct BeamState {
    pub u: DeflectionField,
    pub attached: Vec<bool>,
}

pub(crate) struct NewtonOutcome {
    pub state: BeamState,
    pub iterations: usize,
    pub residual: f64,
    pub load_norm: f64,
    pub stable: bool,
}

struct Evaluation {
    residual: Vec<f64>,
    r_norm: f64,
    load_norm: f64,
    /// Rounding floor of the residual norm: eps * || |K| |u| ||.
    rounding_floor: f64,
    stiffness_density: Vec<f64>,
}

/// Assembled operators of one device at one mesh.
pub(crate) struct BeamSystem<'m> {
    pub mesh: &'m Mesh,
    k: SymBandMatrix,
    pin_dofs: [usize; 2],
    pub stops: Vec<Stop>,
    /// Pull-off force threshold per stop (N); nonzero only on ohmic stops.
    pub adhesion: Vec<f64>,
    settings: SolverSettings,
}

impl<'m> BeamSystem<'m> {
    pub fn new(mesh: &'m Mesh, settings: &SolverSettings) -> Result<Self, SolverError> {
        settings.validate()?;
        let k = assemble(mesh);
        let pin_dofs = [2 * mesh.pillar_nodes[0], 2 * mesh.pillar_nodes[1]];

        // Contact-capable nodes: ohmic bumps plus every node under an
        // electrode zone (the dielectric face is a physical stop at the gap).
        let mut stops: Vec<Stop> = Vec::new();
        for &n in &mesh.contact_nodes {
            stops.push(Stop {
                node: n,
                depth: mesh.contact_stop,
                kind: StopKind::Ohmic,
            });
        }
        for e in &mesh.elements {
            if let Some(zi) = e.zone {
                let kind = StopKind::Dielectric(mesh.zone_dielectrics[zi].2);
                for n in [e.n1, e.n2] {
                    stops.push(Stop {
                        node: n,
                        depth: mesh.gap,
                        kind,
                    });
                }
            }
        }
        stops.sort_by(|a, b| a.node.cmp(&b.node).then(a.depth.total_cmp(&b.depth)));
        stops.dedup_by(|b, a| {
            if a.node == b.node {
                // Keep the shallower stop (first after the sort).
                true
            } else {
                false
            }
        });
        let adhesion = vec![0.0; stops.len()];
        Ok(Self {
            mesh,
            k,
            pin_dofs,
            stops,
            adhesion,
            settings: settings.clone(),
        })
    }

    pub fn with_adhesion(mut self, pull_off_per_ohmic_contact: f64) -> Self {
        for (a, s) in self.adhesion.iter_mut().zip(&self.stops) {
            if s.kind == StopKind::Ohmic {
                *a = pull_off_per_ohmic_contact;
            }
        }
        self
    }

    pub fn flat_state(&self) -> BeamState {
        BeamState {
            u: DeflectionField::zeros(self.mesh.n_nodes()),
            attached: vec![false; self.stops.len()],
        }
    }

    pub fn state_from_deflection(&self, u: &DeflectionField) -> BeamState {
        let attached = self
            .stops
            .iter()
            .map(|s| u.depth(s.node) >= s.depth)
            .collect();
        BeamState {
            u: u.clone(),
            attached,
        }
    }

    /// State with the attachment flags taken from an explicit contact-node
    /// list (adhesive contacts can be attached without penetration).
    pub fn state_from_contacts(&self, u: &DeflectionField, contact_nodes: &[usize]) -> BeamState {
        let attached = self
            .stops
            .iter()
            .map(|s| contact_nodes.contains(&s.node))
            .collect();
        BeamState {
            u: u.clone(),
            attached,
        }
    }

    pub fn contact_fraction(&self, state: &BeamState) -> f64 {
        if self.stops.is_empty() {
            return 0.0;
        }
        state.attached.iter().filter(|&&a| a).count() as f64 / self.stops.len() as f64
    }

    /// Whether any ohmic bump or internal-zone dielectric node is attached.
    pub fn internal_contact(&self, state: &BeamState) -> bool {
        self.stops.iter().zip(&state.attached).any(|(s, &a)| {
            a && matches!(
                s.kind,
                StopKind::Ohmic | StopKind::Dielectric(ElectrodeKind::Internal)
            )
        })
    }

    pub fn any_contact(&self, state: &BeamState) -> bool {
        state.attached.iter().any(|&a| a)
    }

    fn contact_load(&self, state: &BeamState, f: &mut [f64]) {
        let kp = self.settings.penalty_stiffness;
        for (s, &att) in self.stops.iter().zip(&state.attached) {
            if att {
                let pen = state.u.depth(s.node) - s.depth;
                f[2 * s.node] += kp * pen;
            }
        }
    }

    /// One Newton solve at a fixed actuation state.
    pub fn solve(
        &self,
        state: &ActuationState,
        warm: &BeamState,
    ) -> Result<NewtonOutcome, SolverError> {
        self.solve_with_pressure(state, warm, 0.0)
    }

    /// Newton solve with an additional uniform pressure (Pa) pressing the
    /// membrane toward the substrate.
    pub fn solve_with_pressure(
        &self,
        state: &ActuationState,
        warm: &BeamState,
        pressure: f64,
    ) -> Result<NewtonOutcome, SolverError> {
        let f_pressure = self.pressure_load(pressure);
        let mut cur = warm.clone();
        for d in self.pin_dofs {
            cur.u.dofs_mut()[d] = 0.0;
        }
        let trace = std::env::var_os("FREEFLEX_NEWTON_TRACE").is_some();
        let mut iterations = 0usize;
        loop {
            let set_changed = self.update_active_set(&mut cur);
            let eval = self.evaluate(state, &cur, f_pressure.as_deref())?;
            if trace {
                eprintln!(
                    "newton it {iterations}: r={:.3e} load={:.3e} depth={:.4}um peak={:+.4}um attached={} set_changed={set_changed}",
                    eval.r_norm,
                    eval.load_norm,
                    cur.u.max_depth() * 1e6,
                    cur.u.peak_signed() * 1e6,
                    cur.attached.iter().filter(|&&a| a).count(),
                );
            }

            let tolerance = self.settings.newton_tol * eval.load_norm
                + ROUNDING_SAFETY * eval.rounding_floor
                + LOAD_NORM_FLOOR;
            if !set_changed && eval.r_norm <= tolerance {
                let stable = self.tangent(&cur, &eval.stiffness_density)?.1;
                return Ok(NewtonOutcome {
                    state: cur,
                    iterations,
                    residual: eval.r_norm,
                    load_norm: eval.load_norm,
                    stable,
                });
            }
            if iterations >= self.settings.max_newton_iters {
                return Err(self.no_convergence(state, iterations, &eval));
            }

            let neg_r: Vec<f64> = eval.residual.iter().map(|&r| -r).collect();
            let cap = STEP_CAP_FRACTION * self.mesh.gap;

            // Backtracked Newton step with the true (softened) tangent, taken
            // only while that tangent is positive definite. An indefinite
            // tangent means the iterate sits past a fold where no nearby root
            // exists; Newton then just orbits the residual minimum.
            let mut accepted: Option<BeamState> = None;
            match self.tangent(&cur, &eval.stiffness_density) {
                Ok((factor, true)) => {
                    let delta = factor.solve(&neg_r);
                    let max_dw = delta
                        .iter()
                        .step_by(2)
                        .fold(0.0f64, |acc, &d| acc.max(d.abs()));
                    let mut step = if max_dw > cap { cap / max_dw } else { 1.0 };
                    for _ in 0..3 {
                        if let Some(trial) = self.apply_step(&cur, &delta, step) {
                            let trial_eval = self.evaluate(state, &trial, f_pressure.as_deref())?;
                            if trial_eval.r_norm < eval.r_norm {
                                accepted = Some(trial);
                                break;
                            }
                        }
                        step *= 0.5;
                    }
                }
                Ok((_, false)) | Err(_) => {}
            }

            // Fall mode: advance with the positive-definite elastic operator
            // (bending stiffness plus active contact springs, no softening).
            // The force imbalance walks the membrane down the fall until
            // contact restores a stable tangent.
            if accepted.is_none() {
                let (factor, _) = self.tangent(&cur, &[])?;
                let delta = factor.solve(&neg_r);
                let max_dw = delta
                    .iter()
                    .step_by(2)
                    .fold(0.0f64, |acc, &d| acc.max(d.abs()));
                let min_push = FALL_MIN_PUSH_FRACTION * self.mesh.gap;
                let step = if max_dw > cap {
                    cap / max_dw
                } else if max_dw > 0.0 && max_dw < min_push {
                    min_push / max_dw
                } else {
                    1.0
                };
                accepted = self.apply_step(&cur, &delta, step);
            }
            match accepted {
                Some(next) => cur = next,
                None => return Err(self.no_convergence(state, iterations, &eval)),
            }
            iterations += 1;
        }
    }

    fn apply_step(&self, cur: &BeamState, delta: &[f64], step: f64) -> Option<BeamState> {
        let mut trial = cur.clone();
        for (u, d) in trial.u.dofs_mut().iter_mut().zip(delta) {
            *u += step * d;
        }
        for d in self.pin_dofs {
            trial.u.dofs_mut()[d] = 0.0;
        }
        trial.u.all_finite().then(|| {
            let mut t = trial;
            self.update_active_set(&mut t);
            t
        })
    }

    /// Attach on penetration, detach when the spring tension exceeds the
    /// adhesion capacity. Returns whether the set changed.
    fn update_active_set(&self, cur: &mut BeamState) -> bool {
        let kp = self.settings.penalty_stiffness;
        let mut changed = false;
        for (i, s) in self.stops.iter().enumerate() {
            let pen = cur.u.depth(s.node) - s.depth;
            if cur.attached[i] {
                if kp * pen < -self.adhesion[i] {
                    cur.attached[i] = false;
                    changed = true;
                }
            } else if pen >= 0.0 {
                cur.attached[i] = true;
                changed = true;
            }
        }
        changed
    }

    fn evaluate(
        &self,
        state: &ActuationState,
        cur: &BeamState,
        f_pressure: Option<&[f64]>,
    ) -> Result<Evaluation, SolverError> {
        let opts = TractionOptions {
            fringing: false,
            clamp_at_dielectric: true,
        };
        let profile = build_traction_opts(self.mesh, state, &cur.u, opts)?;
        let mut f = es_load(self.mesh, &profile.traction);
        if let Some(fp) = f_pressure {
            for (a, b) in f.iter_mut().zip(fp) {
                *a += b;
            }
        }
        let applied_norm = norm2(&f);
        let mut fc = vec![0.0; self.mesh.n_dofs()];
        self.contact_load(cur, &mut fc);
        let contact_norm = norm2(&fc);
        let mut residual = self.k.mul_vec(cur.u.dofs());
        for ((r, fi), ci) in residual.iter_mut().zip(&f).zip(&fc) {
            *r -= fi + ci;
        }
        for d in self.pin_dofs {
            residual[d] = 0.0;
        }
        let r_norm = norm2(&residual);
        let rounding_floor = f64::EPSILON * norm2(&self.k.mul_vec_abs(cur.u.dofs()));
        Ok(Evaluation {
            residual,
            r_norm,
            load_norm: applied_norm + contact_norm,
            rounding_floor,
            stiffness_density: profile.stiffness_density,
        })
    }

    fn no_convergence(
        &self,
        state: &ActuationState,
        iterations: usize,
        eval: &Evaluation,
    ) -> SolverError {
        SolverError::NoConvergence {
            voltage: state
                .effective(ElectrodeKind::Internal)
                .abs()
                .max(state.effective(ElectrodeKind::External).abs()),
            iterations,
            residual: if eval.load_norm > 0.0 {
                eval.r_norm / eval.load_norm
            } else {
                eval.r_norm
            },
        }
    }

    fn pressure_load(&self, pressure: f64) -> Option<Vec<f64>> {
        if pressure == 0.0 {
            return None;
        }
        let traction: Vec<f64> = self
            .mesh
            .elements
            .iter()
            .map(|e| -pressure * e.width)
            .collect();
        Some(assemble_traction_load(self.mesh, &traction))
    }

    /// Constrained tangent (factorized) at the current iterate and whether
    /// it is positive definite. The electrostatic softening is the exact
    /// derivative of the one-point-quadrature load: a symmetric rank-1 block
    /// `k_s * le * N(mid)^T N(mid)` per element.
    fn tangent(
        &self,
        cur: &BeamState,
        stiffness_density: &[f64],
    ) -> Result<(crate::fem::BandFactor, bool), SolverError> {
        let mut j = self.k.clone();
        for (e, &ks) in self.mesh.elements.iter().zip(stiffness_density) {
            if ks != 0.0 {
                let n = midpoint_shape(e.length);
                let scale = ks * e.length;
                let mut neg = [[0.0; 4]; 4];
                for a in 0..4 {
                    for b in 0..4 {
                        neg[a][b] = -scale * n[a] * n[b];
                    }
                }
                add_element(&mut j, e.n1, &neg);
            }
        }
        let kp = self.settings.penalty_stiffness;
        for (s, &att) in self.stops.iter().zip(&cur.attached) {
            if att {
                j.add(2 * s.node, 2 * s.node, kp);
            }
        }
        for d in self.pin_dofs {
            j.eliminate_dof(d);
        }
        let factor = j.factor()?;
        let stable = factor.is_positive_definite();
        Ok((factor, stable))
    }

    /// Packs a converged state into the public result type.
    pub fn result(
        &self,
        state: &ActuationState,
        outcome: &NewtonOutcome,
    ) -> Result<EquilibriumResult, SolverError> {
        let kp = self.settings.penalty_stiffness;
        let cur = &outcome.state;
        let mut contact_nodes = Vec::new();
        let mut contact_forces = Vec::new();
        let mut contact_kinds = Vec::new();
        for (s, &att) in self.stops.iter().zip(&cur.attached) {
            if att {
                contact_nodes.push(s.node);
                contact_forces.push(kp * (cur.u.depth(s.node) - s.depth));
                contact_kinds.push(s.kind);
            }
        }
        // Pin reactions from the full out-of-balance at the pinned DOFs.
        let opts = TractionOptions {
            fringing: false,
            clamp_at_dielectric: true,
        };
        let profile = build_traction_opts(self.mesh, state, &cur.u, opts)?;
        let mut f = es_load(self.mesh, &profile.traction);
        self.contact_load(cur, &mut f);
        let ku = self.k.mul_vec(cur.u.dofs());
        let pin_reactions = [
            ku[self.pin_dofs[0]] - f[self.pin_dofs[0]],
            ku[self.pin_dofs[1]] - f[self.pin_dofs[1]],
        ];
        let liftoff_tol = 1e-12;
        Ok(EquilibriumResult {
            deflection: cur.u.clone(),
            contact_nodes,
            contact_forces,
            contact_kinds,
            pin_reactions,
            converged: true,
            iterations: outcome.iterations,
            residual_norm: outcome.residual,
            load_norm: outcome.load_norm,
            tangent_positive_definite: outcome.stable,
            pin_liftoff: pin_reactions.iter().any(|&r| r < -liftoff_tol),
        })
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Hermite shape functions at the element midpoint, `[w1, th1, w2, th2]`.
#[inline]
fn midpoint_shape(le: f64) -> [f64; 4] {
    [0.5, le / 8.0, 0.5, -le / 8.0]
}

/// Electrostatic load of a midpoint-sampled traction profile: one-point
/// quadrature `f_e = q(mid) * le * N(mid)`. Using the same sampling for the
/// load and (through [`midpoint_shape`]) for its derivative makes the Newton
/// tangent exact for the discrete residual.
fn es_load(mesh: &Mesh, traction: &[f64]) -> Vec<f64> {
    let mut f = vec![0.0; mesh.n_dofs()];
    for (e, &q) in mesh.elements.iter().zip(traction) {
        if q == 0.0 {
            continue;
        }
        let n = midpoint_shape(e.length);
        let s = q * e.length;
        let d0 = 2 * e.n1;
        for (a, &na) in n.iter().enumerate() {
            f[d0 + a] += s * na;
        }
    }
    f
}

/// Voltage path of one electrode group over a beam system.
pub(crate) struct BeamPath<'a, 'm> {
    pub system: &'a BeamSystem<'m>,
    pub electrodes: ElectrodeKind,
    pub base: ActuationState,
}

impl FoldSystem for BeamPath<'_, '_> {
    type State = BeamState;

    fn solve_at(&self, v: f64, warm: &Self::State) -> Option<(Self::State, bool)> {
        let st = self.base.with_drive(self.electrodes, v);
        match self.system.solve(&st, warm) {
            Ok(out) => Some((out.state, out.stable)),
            Err(e) => {
                if std::env::var_os("FREEFLEX_FOLD_TRACE").is_some() {
                    eprintln!("solve_at({v:.4}) failed: {e}");
                }
                None
            }
        }
    }

    fn displacement(&self, s: &Self::State) -> f64 {
        s.u.peak_signed().abs()
    }

    fn jump_threshold(&self) -> f64 {
        JUMP_FRACTION * self.system.mesh.gap
    }
}

/// Single coupled equilibrium at a fixed actuation state.
///
/// Non-convergence is reported through the `converged` flag (with the last
/// iterate) rather than as a hard error; it usually marks a start point past
/// the fold.
pub fn equilibrium(
    device: &ValidatedSpec,
    mesh: &Mesh,
    state: &ActuationState,
    settings: &SolverSettings,
    initial: &DeflectionField,
) -> Result<EquilibriumResult, SolverError> {
    debug_assert_eq!(mesh.gap, device.gap());
    let system = BeamSystem::new(mesh, settings)?;
    let warm = system.state_from_deflection(initial);
    match system.solve(state, &warm) {
        Ok(out) => system.result(state, &out),
        Err(SolverError::NoConvergence {
            iterations,
            residual,
            ..
        }) => Ok(EquilibriumResult {
            deflection: initial.clone(),
            contact_nodes: vec![],
            contact_forces: vec![],
            contact_kinds: vec![],
            pin_reactions: [0.0, 0.0],
            converged: false,
            iterations,
            residual_norm: residual,
            load_norm: f64::NAN,
            tangent_positive_definite: false,
            pin_liftoff: false,
        }),
        Err(e) => Err(e),
    }
}

/// Traces the equilibrium path over an ascending voltage grid, warm-starting
/// each solve from the previous solution. Records both the pre- and
/// post-pull-in branches.
pub fn trace_cv_curve(
    device: &ValidatedSpec,
    electrodes: ElectrodeKind,
    v_grid: &[f64],
    settings: &SolverSettings,
) -> Result<Vec<CvPoint>, SolverError> {
    if v_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(SolverError::NonAscendingGrid);
    }
    let mesh = build_mesh(device, settings.n_elements)?;
    let system = BeamSystem::new(&mesh, settings)?;
    let mut out = Vec::with_capacity(v_grid.len());
    let mut warm = system.flat_state();
    for &v in v_grid {
        let st = ActuationState::rest().with_drive(electrodes, v);
        let outcome = system.solve(&st, &warm).map_err(|e| match e {
            SolverError::NoConvergence {
                iterations,
                residual,
                ..
            } => SolverError::NoConvergence {
                voltage: v,
                iterations,
                residual,
            },
            other => other,
        })?;
        warm = outcome.state.clone();
        out.push(CvPoint {
            voltage: v,
            peak_displacement: warm.u.peak_signed(),
            contact_fraction: system.contact_fraction(&warm),
        });
    }
    Ok(out)
}

/// Finds the pull-in voltage of the selected electrode group by an ascending
/// scan refined by bisection.
pub fn find_pullin(
    device: &ValidatedSpec,
    electrodes: ElectrodeKind,
    v_max: f64,
    settings: &SolverSettings,
) -> Result<PullInResult, SolverError> {
    find_pullin_with_base(device, electrodes, &ActuationState::rest(), v_max, settings)
}

/// [`find_pullin`] with charging offsets or a bias on the other electrode
/// group held fixed.
pub fn find_pullin_with_base(
    device: &ValidatedSpec,
    electrodes: ElectrodeKind,
    base: &ActuationState,
    v_max: f64,
    settings: &SolverSettings,
) -> Result<PullInResult, SolverError> {
    let mesh = build_mesh(device, settings.n_elements)?;
    let system = BeamSystem::new(&mesh, settings)?;
    pullin_on_system(&system, electrodes, base, v_max, settings)
}

pub(crate) fn pullin_on_system(
    system: &BeamSystem,
    electrodes: ElectrodeKind,
    base: &ActuationState,
    v_max: f64,
    settings: &SolverSettings,
) -> Result<PullInResult, SolverError> {
    let path = BeamPath {
        system,
        electrodes,
        base: *base,
    };
    let start = system
        .solve(&base.with_drive(electrodes, 0.0), &system.flat_state())
        .map_err(|_| SolverError::NoPullInBelowVmax { v_max })?;
    let bracket = bracket_fold(
        &path,
        start.state,
        0.0,
        v_max,
        settings.v_step,
        settings.bisect_tol,
    )
    .ok_or(SolverError::NoPullInBelowVmax { v_max })?;
    Ok(PullInResult {
        v_pullin: bracket.v_unstable,
        bracket: (bracket.v_stable, bracket.v_unstable),
        peak_displacement: bracket.stable_state.u.peak_signed(),
        deflection_at_onset: bracket.stable_state.u,
    })
}

/// Finds the pull-out (release) voltage: establishes a contacted state just
/// above pull-in, then descends until the contact set empties.
pub fn find_pullout(
    device: &ValidatedSpec,
    electrodes: ElectrodeKind,
    settings: &SolverSettings,
) -> Result<PullOutResult, SolverError> {
    find_pullout_with_base(device, electrodes, &ActuationState::rest(), settings)
}

/// [`find_pullout`] with charging offsets held fixed during the descent.
pub fn find_pullout_with_base(
    device: &ValidatedSpec,
    electrodes: ElectrodeKind,
    base: &ActuationState,
    settings: &SolverSettings,
) -> Result<PullOutResult, SolverError> {
    let mesh = build_mesh(device, settings.n_elements)?;
    let system = BeamSystem::new(&mesh, settings)?;
    let (v_start, contacted) = contacted_state(&system, electrodes, base, settings)?;
    pullout_on_system(&system, electrodes, base, v_start, contacted, settings)
}

/// Drives the selected electrodes past pull-in and returns a firmly
/// contacted state together with its voltage.
pub(crate) fn contacted_state(
    system: &BeamSystem,
    electrodes: ElectrodeKind,
    base: &ActuationState,
    settings: &SolverSettings,
) -> Result<(f64, BeamState), SolverError> {
    let pi = pullin_on_system(system, electrodes, base, DRIVE_SCAN_VMAX, settings)
        .map_err(|_| SolverError::NoContactedState)?;
    let mut warm = system.state_from_deflection(&pi.deflection_at_onset);
    // Walk a little beyond the fold so the contact is firmly established.
    let mut v = pi.v_pullin;
    let v_end = pi.v_pullin * 1.05 + 2.0 * settings.v_step;
    loop {
        let st = base.with_drive(electrodes, v);
        match system.solve(&st, &warm) {
            Ok(out) => warm = out.state,
            Err(e) => return Err(e),
        }
        if v >= v_end {
            break;
        }
        v = (v + settings.v_step).min(v_end);
    }
    if !system.any_contact(&warm) {
        return Err(SolverError::NoContactedState);
    }
    Ok((v, warm))
}

pub(crate) fn pullout_on_system(
    system: &BeamSystem,
    electrodes: ElectrodeKind,
    base: &ActuationState,
    v_start: f64,
    contacted: BeamState,
    settings: &SolverSettings,
) -> Result<PullOutResult, SolverError> {
    let path = BeamPath {
        system,
        electrodes,
        base: *base,
    };
    let release = bracket_release(
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
    match release {
        ReleaseOutcome::Released(b) => Ok(PullOutResult {
            v_pullout: b.v_stable,
            bracket: (b.v_stable, b.v_unstable),
        }),
        ReleaseOutcome::Held(_) => Err(SolverError::NeverReleases),
    }
}

/// Reschedules the device template to a new pillar-inset ratio: pillars move
/// to `r*L` and `(1-r)*L`, and every axial coordinate is mapped piecewise
/// affinely region by region.
pub fn rescale_to_ratio(template: &DeviceSpec, ratio: f64) -> Result<DeviceSpec, SolverError> {
    if !(ratio > 0.0 && ratio < 0.5) {
        return Err(SolverError::InvalidRatio { ratio });
    }
    let l = template.geometry.length;
    let [p1, p2] = template.geometry.pillar_positions;
    let (q1, q2) = (ratio * l, (1.0 - ratio) * l);
    let map = |x: f64| -> f64 {
        if x <= p1 {
            x * q1 / p1
        } else if x <= p2 {
            q1 + (x - p1) * (q2 - q1) / (p2 - p1)
        } else {
            q2 + (x - p2) * (l - q2) / (l - p2)
        }
    };
    let mut out = template.clone();
    out.geometry.pillar_positions = [q1, q2];
    for seg in &mut out.geometry.width_segments {
        seg.x_start = map(seg.x_start);
        seg.x_end = map(seg.x_end);
    }
    for z in &mut out.electrodes {
        z.x_start = map(z.x_start);
        z.x_end = map(z.x_end);
    }
    for x in &mut out.contacts.positions {
        *x = map(*x);
    }
    Ok(out)
}

/// Sweeps the pillar-inset ratio: per ratio, the external pull-in voltage
/// and the upward center displacement of the collapsed state at pull-in.
/// Per-ratio failures are recorded without aborting the sweep.
pub fn sweep_ratio(
    template: &DeviceSpec,
    ratios: &[f64],
    settings: &SolverSettings,
) -> Vec<RatioPoint> {
    ratios
        .iter()
        .map(|&ratio| RatioPoint {
            ratio,
            result: ratio_point(template, ratio, settings),
        })
        .collect()
}

fn ratio_point(
    template: &DeviceSpec,
    ratio: f64,
    settings: &SolverSettings,
) -> Result<(f64, f64), SolverError> {
    let spec = rescale_to_ratio(template, ratio)?;
    let device = validate_spec(spec)?;
    let mesh = build_mesh(&device, settings.n_elements)?;
    let system = BeamSystem::new(&mesh, settings)?;
    let pi = pullin_on_system(
        &system,
        ElectrodeKind::External,
        &ActuationState::rest(),
        DRIVE_SCAN_VMAX,
        settings,
    )?;
    // Collapsed equilibrium at the pull-in voltage itself.
    let warm = system.state_from_deflection(&pi.deflection_at_onset);
    let st = ActuationState::external(pi.v_pullin);
    let out = system.solve(&st, &warm)?;
    Ok((pi.v_pullin, out.state.u.max_up()))
}
