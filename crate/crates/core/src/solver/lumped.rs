//! Single-DOF reduction harness: a rigid plate on a lumped spring.
//!
//! The plate problem `k x = eps0 A V^2 / (2 (g - x)^2)` has the closed-form
//! pull-in voltage `sqrt(8 k g^3 / (27 eps0 A))` at one third of the gap,
//! which makes it the independent oracle for the fold-bracketing machinery
//! shared with the beam solver.

use crate::electrostatic::{effective_gap, EPS0};
use crate::solver::fold::{bracket_fold, FoldSystem};
use crate::solver::SolverError;

/// Rigid plate on a lumped spring over a (possibly dielectric-covered)
/// electrode.
#[derive(Debug, Clone, Copy)]
pub struct LumpedPlate {
    /// Suspension stiffness (N/m).
    pub stiffness: f64,
    /// Air gap at rest (m).
    pub gap: f64,
    /// Plate area (m^2).
    pub area: f64,
    /// Dielectric thickness (m), 0 for a bare electrode.
    pub dielectric_thickness: f64,
    pub dielectric_rel_permittivity: f64,
}

/// Pull-in bracket of the lumped plate.
#[derive(Debug, Clone, Copy)]
pub struct LumpedPullIn {
    pub v_pullin: f64,
    pub bracket: (f64, f64),
    /// Plate approach at the last stable voltage (m).
    pub displacement_at_onset: f64,
}

impl LumpedPlate {
    pub fn new(stiffness: f64, gap: f64, area: f64) -> Self {
        Self {
            stiffness,
            gap,
            area,
            dielectric_thickness: 0.0,
            dielectric_rel_permittivity: 1.0,
        }
    }

    fn g_e(&self, x: f64) -> f64 {
        effective_gap(
            self.gap - x,
            self.dielectric_thickness,
            self.dielectric_rel_permittivity,
        )
        .expect("eps_r >= 1")
    }

    /// Out-of-balance force at approach x (N), positive restoring.
    pub fn residual(&self, x: f64, v: f64) -> f64 {
        let ge = self.g_e(x);
        self.stiffness * x - EPS0 * self.area * v * v / (2.0 * ge * ge)
    }

    /// Tangent stiffness at approach x (N/m).
    pub fn tangent(&self, x: f64, v: f64) -> f64 {
        let ge = self.g_e(x);
        self.stiffness - EPS0 * self.area * v * v / (ge * ge * ge)
    }

    /// Closed-form pull-in voltage of the plate (with the dielectric folded
    /// into the zero-approach effective gap).
    pub fn closed_form_pullin(&self) -> f64 {
        let g = self.g_e(0.0);
        (8.0 * self.stiffness * g * g * g / (27.0 * EPS0 * self.area)).sqrt()
    }

    /// Newton solve for the equilibrium approach at voltage v.
    fn solve(&self, v: f64, warm: f64) -> Option<(f64, bool)> {
        let mut x = warm;
        let cap = 0.15 * self.gap;
        for _ in 0..60 {
            // Past the electrode surface there is no physical branch to find.
            if x >= self.gap * (1.0 - 1e-9) && self.dielectric_thickness == 0.0 {
                return None;
            }
            let r = self.residual(x, v);
            let scale = self.stiffness * self.gap;
            if r.abs() <= 1e-12 * scale {
                return Some((x, self.tangent(x, v) > 0.0));
            }
            let t = self.tangent(x, v);
            if t == 0.0 {
                return None;
            }
            let mut dx = -r / t;
            if dx.abs() > cap {
                dx = cap * dx.signum();
            }
            x += dx;
            if !x.is_finite() {
                return None;
            }
        }
        None
    }

    /// Pull-in search sharing the scan-and-bisect driver with the beam solver.
    pub fn find_pullin(
        &self,
        v_max: f64,
        v_step: f64,
        bisect_tol: f64,
    ) -> Result<LumpedPullIn, SolverError> {
        let bracket = bracket_fold(self, 0.0, 0.0, v_max, v_step, bisect_tol)
            .ok_or(SolverError::NoPullInBelowVmax { v_max })?;
        Ok(LumpedPullIn {
            v_pullin: bracket.v_unstable,
            bracket: (bracket.v_stable, bracket.v_unstable),
            displacement_at_onset: bracket.stable_state,
        })
    }
}

impl FoldSystem for LumpedPlate {
    type State = f64;

    fn solve_at(&self, v: f64, warm: &f64) -> Option<(f64, bool)> {
        self.solve(v, *warm)
    }

    fn displacement(&self, s: &f64) -> f64 {
        *s
    }

    fn jump_threshold(&self) -> f64 {
        0.10 * self.gap
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_value() {
        // k = 10 N/m, g = 1 um, A = (100 um)^2 -> 5.79 V.
        let plate = LumpedPlate::new(10.0, 1e-6, 1e-8);
        let v = plate.closed_form_pullin();
        assert!((v - 5.785).abs() < 0.01, "{v}");
    }

    #[test]
    fn bracketed_pullin_matches_closed_form() {
        let plate = LumpedPlate::new(10.0, 1e-6, 1e-8);
        let pi = plate.find_pullin(10.0, 0.05, 1e-5).unwrap();
        let expect = plate.closed_form_pullin();
        assert!(
            ((pi.v_pullin - expect) / expect).abs() < 0.01,
            "{} vs {expect}",
            pi.v_pullin
        );
        let x_expect = 1e-6 / 3.0;
        assert!(
            ((pi.displacement_at_onset - x_expect) / x_expect).abs() < 0.02,
            "{} vs {x_expect}",
            pi.displacement_at_onset
        );
    }

    #[test]
    fn no_pullin_below_low_vmax() {
        let plate = LumpedPlate::new(10.0, 1e-6, 1e-8);
        assert!(matches!(
            plate.find_pullin(1.0, 0.05, 1e-5),
            Err(SolverError::NoPullInBelowVmax { .. })
        ));
    }

    #[test]
    fn stiffer_spring_pulls_in_later() {
        let soft = LumpedPlate::new(5.0, 1e-6, 1e-8);
        let stiff = LumpedPlate::new(20.0, 1e-6, 1e-8);
        let v_soft = soft.find_pullin(20.0, 0.05, 1e-4).unwrap().v_pullin;
        let v_stiff = stiff.find_pullin(20.0, 0.05, 1e-4).unwrap().v_pullin;
        assert!(v_stiff > v_soft);
    }
}
