//! Calibration audit: evaluates the frozen layout assumptions against the
//! verification anchors and prints one row per solver resolution, or a row
//! for an ad-hoc layout passed on the command line.
//!
//! Anchors (bands from the acceptance suite):
//!   Vpi_ext  external pull-in, 1 um-gap device      3.5 V  +-15%
//!   lift     collapsed upward center lift at V_pi   1.8 um +-15%
//!   maxstab  max stable internal displacement (1um) 0.6..0.9 um
//!   Vpi_int  internal pull-in, 0.7 um-gap device    3.5 V  +-20%
//!   Vpo      internal pull-out, 0.7 um-gap device   1.4 V  +-20%
//!   stk2     2 V charge sticks at zero drive        true
//!   rel1     1 V charge self-releases               true
//!   unstick  external unstick at 2 V charge         3..7 V
//!   plateau  peak drift over [Vpi, 1.5 Vpi]         < 5%
//!
//! Ad-hoc usage:
//!   calibrate <pad_from> <pad_to> <spine_w> <E_GPa> <stop07> <stop10> <ext_from> <ext_to>
//! (lengths in um, measured as in `device::presets::Layout`).

use freeflex::device::presets::{custom_switch, Layout};
use freeflex::device::{validate_spec, ElectrodeKind};
use freeflex::electrostatic::ActuationState;
use freeflex::solver::{
    find_pullin, find_pullout_with_base, sweep_ratio, trace_cv_curve, SolverSettings,
};
use freeflex::stiction::{stuck_state, unstick_voltage, AdhesionModel, StuckOutcome};

fn main() {
    let um = 1e-6;
    let mut candidates: Vec<(String, Layout, f64, f64, usize)> = Vec::new();
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() == 8 {
        let p: Vec<f64> = args.iter().map(|a| a.parse().unwrap()).collect();
        let layout = Layout {
            internal_pad: [p[0] * um, p[1] * um],
            spine_width: p[2] * um,
            youngs_modulus: p[3] * 1e9,
            external_pad: [p[6] * um, p[7] * um],
            ..Layout::default()
        };
        candidates.push(("cli".into(), layout, p[4] * um, p[5] * um, 240));
    } else {
        for n in [160usize, 240, 320] {
            candidates.push((
                format!("default-n{n}"),
                Layout::default(),
                0.44e-6,
                0.56e-6,
                n,
            ));
        }
    }

    println!(
        "{:<16} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6} {:>6} {:>7} {:>8}",
        "candidate",
        "Vpi_ext",
        "lift",
        "maxstab",
        "Vpi_int",
        "Vpo",
        "stk2",
        "rel1",
        "unstick",
        "plateau"
    );
    for (name, layout, stop07, stop10, n) in candidates {
        let settings = SolverSettings {
            n_elements: n,
            ..SolverSettings::default()
        };
        println!(
            "{name:<16} {}",
            evaluate(&layout, stop07, stop10, &settings)
        );
    }
}

fn evaluate(layout: &Layout, stop07: f64, stop10: f64, settings: &SolverSettings) -> String {
    let d1 = validate_spec(custom_switch(layout, 1.0e-6, stop10)).unwrap();
    let d07 = validate_spec(custom_switch(layout, 0.7e-6, stop07)).unwrap();

    let vpi_ext = find_pullin(&d1, ElectrodeKind::External, 15.0, settings)
        .map(|p| p.v_pullin)
        .unwrap_or(f64::NAN);
    let lift = match &sweep_ratio(d1.spec(), &[0.1], settings)[0].result {
        Ok((_, up)) => *up,
        Err(_) => f64::NAN,
    };
    let pi1 = find_pullin(&d1, ElectrodeKind::Internal, 15.0, settings);
    let maxstab = pi1
        .as_ref()
        .map(|p| p.peak_displacement.abs())
        .unwrap_or(f64::NAN);
    let vpi_int = find_pullin(&d07, ElectrodeKind::Internal, 15.0, settings)
        .map(|p| p.v_pullin)
        .unwrap_or(f64::NAN);
    let vpo = find_pullout_with_base(
        &d07,
        ElectrodeKind::Internal,
        &ActuationState::rest(),
        settings,
    )
    .map(|p| p.v_pullout)
    .unwrap_or(f64::NAN);
    let adhesion = AdhesionModel::default();
    let stuck2 = stuck_state(&d07, 2.0, &adhesion, settings);
    let stuck_flag = matches!(stuck2, Ok(StuckOutcome::Stuck(_)));
    let rel1 = matches!(
        stuck_state(&d07, 1.0, &adhesion, settings),
        Ok(StuckOutcome::NotStuck(_))
    );
    let unstick = match &stuck2 {
        Ok(StuckOutcome::Stuck(s)) => unstick_voltage(&d07, s, 12.0, settings).unwrap_or(f64::NAN),
        _ => f64::NAN,
    };
    let plateau = match &pi1 {
        Ok(p) => {
            let grid: Vec<f64> = (0..=20)
                .map(|i| p.v_pullin * (1.0 + 0.5 * i as f64 / 20.0))
                .collect();
            match trace_cv_curve(&d1, ElectrodeKind::Internal, &grid, settings) {
                Ok(tr) => {
                    let p0 = tr[0].peak_displacement.abs();
                    tr.iter()
                        .map(|q| (q.peak_displacement.abs() - p0).abs())
                        .fold(0.0f64, f64::max)
                        / p0
                }
                Err(_) => f64::NAN,
            }
        }
        Err(_) => f64::NAN,
    };

    format!(
        "{:7.3} {:7.3} {:7.3} {:7.3} {:7.3} {:>6} {:>6} {:7.3} {:8.4}",
        vpi_ext,
        lift * 1e6,
        maxstab * 1e6,
        vpi_int,
        vpo,
        stuck_flag,
        rel1,
        unstick,
        plateau
    )
}
