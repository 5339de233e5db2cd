//! Batch scenario runner: reads a device/scenario config, dispatches the
//! solver, and writes plot-ready CSV tables (plus Touchstone files for the
//! RF scenarios) together with a run manifest.
//!
//! Exit codes: 0 success, 1 usage error, 2 solver/model error, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use freeflex::config::{config_hash, ConfigError, ScenarioConfig};
use freeflex::device::{build_mesh, validate_spec, ElectrodeKind, ValidatedSpec};
use freeflex::electrostatic::ActuationState;
use freeflex::rf::{
    contact_resistance, export_touchstone, fit_lumped, shunt_sparams, SwitchCircuit, SwitchState,
};
use freeflex::solver::{find_pullin, find_pullout_with_base, sweep_ratio, trace_cv_curve};
use freeflex::stiction::{
    min_pressure_to_contact, stuck_state, unstick_voltage, AdhesionModel, ArchetypeKind,
    BeamArchetype, StictionError, StuckOutcome,
};
use freeflex::table::{emit_csv, ResultTable};

#[derive(Parser)]
#[command(
    name = "freeflex",
    version,
    about = "Free-flexible-membrane RF MEMS switch simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV/Touchstone/manifest files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the solver's minimum element count.
    #[arg(long, global = true)]
    elements: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Pull-in voltage of one electrode group.
    Pullin,
    /// Pull-out (release) voltage of one electrode group.
    Pullout,
    /// Deflection versus voltage trace (pre- and post-pull-in branches).
    CvCurve,
    /// Pull-in voltage and collapsed lever lift versus pillar-inset ratio.
    RatioSweep,
    /// Stuck-state classification and external unstick voltage per charge level.
    Unstick,
    /// Minimum uniform pressure inducing contact for the support archetypes.
    Table1,
    /// Two-port S-parameters of the lumped switch model (CSV + .s2p).
    Rf,
    /// Closed-form fit of the lumped circuit to isolation/insertion targets.
    FitRf,
}

#[derive(Debug)]
enum RunError {
    Usage(String),
    Model(String),
    Io(String),
}

impl RunError {
    fn exit_code(&self) -> u8 {
        match self {
            RunError::Usage(_) => 1,
            RunError::Model(_) => 2,
            RunError::Io(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            RunError::Usage(_) => "usage",
            RunError::Model(_) => "model",
            RunError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            RunError::Usage(m) | RunError::Model(m) | RunError::Io(m) => m,
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Read { .. } => RunError::Io(e.to_string()),
            ConfigError::Parse(_) | ConfigError::MissingBlock(_) => RunError::Usage(e.to_string()),
        }
    }
}

impl From<freeflex::solver::SolverError> for RunError {
    fn from(e: freeflex::solver::SolverError) -> Self {
        RunError::Model(e.to_string())
    }
}

impl From<freeflex::device::DeviceError> for RunError {
    fn from(e: freeflex::device::DeviceError) -> Self {
        RunError::Model(e.to_string())
    }
}

impl From<StictionError> for RunError {
    fn from(e: StictionError) -> Self {
        RunError::Model(e.to_string())
    }
}

impl From<freeflex::rf::RfError> for RunError {
    fn from(e: freeflex::rf::RfError) -> Self {
        match e {
            freeflex::rf::RfError::Io(io) => RunError::Io(io.to_string()),
            other => RunError::Model(other.to_string()),
        }
    }
}

impl From<freeflex::table::TableError> for RunError {
    fn from(e: freeflex::table::TableError) -> Self {
        match e {
            freeflex::table::TableError::Io(io) => RunError::Io(io.to_string()),
            other => RunError::Model(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({}): {}", e.kind(), e.message());
            if let Some(out) = &cli.out {
                let _ = std::fs::create_dir_all(out);
                let record = format!("kind = {:?}\nmessage = {:?}\n", e.kind(), e.message());
                let _ = std::fs::write(out.join("error.toml"), record);
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), RunError> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| RunError::Usage("--config <path> is required".into()))?;
    let out_dir = cli
        .out
        .as_deref()
        .ok_or_else(|| RunError::Usage("--out <dir> is required".into()))?;
    let mut config = ScenarioConfig::from_path(config_path)?;
    if let Some(n) = cli.elements {
        config.solver.n_elements = n;
    }
    std::fs::create_dir_all(out_dir).map_err(|e| RunError::Io(e.to_string()))?;

    let device = validate_spec(config.device.clone())?;
    config.solver.validate()?;

    match cli.command {
        Command::Pullin => run_pullin(&config, &device, out_dir)?,
        Command::Pullout => run_pullout(&config, &device, out_dir)?,
        Command::CvCurve => run_cv_curve(&config, &device, out_dir)?,
        Command::RatioSweep => run_ratio_sweep(&config, out_dir)?,
        Command::Unstick => run_unstick(&config, &device, out_dir)?,
        Command::Table1 => run_table1(&config, &device, out_dir)?,
        Command::Rf => run_rf(&config, &device, out_dir)?,
        Command::FitRf => run_fit_rf(&config, out_dir)?,
    }
    write_manifest(&config, out_dir)
}

fn electrodes_code(kind: ElectrodeKind) -> f64 {
    match kind {
        ElectrodeKind::Internal => 0.0,
        ElectrodeKind::External => 1.0,
    }
}

fn run_pullin(config: &ScenarioConfig, device: &ValidatedSpec, out: &Path) -> Result<(), RunError> {
    let block = config
        .pullin
        .as_ref()
        .ok_or(ConfigError::MissingBlock("pullin"))?;
    let pi = find_pullin(device, block.electrodes, block.v_max, &config.solver)?;
    let mut table = ResultTable::new(vec![
        "electrodes_internal0_external1",
        "v_pullin_V",
        "v_stable_V",
        "v_unstable_V",
        "peak_displacement_m",
    ])?;
    table.push_row(vec![
        electrodes_code(block.electrodes),
        pi.v_pullin,
        pi.bracket.0,
        pi.bracket.1,
        pi.peak_displacement,
    ])?;
    emit_csv(&table, &out.join("pullin.csv"))?;
    Ok(())
}

fn run_pullout(
    config: &ScenarioConfig,
    device: &ValidatedSpec,
    out: &Path,
) -> Result<(), RunError> {
    let block = config
        .pullout
        .as_ref()
        .ok_or(ConfigError::MissingBlock("pullout"))?;
    let base = ActuationState {
        v_charge_internal: block.v_charge_internal,
        ..ActuationState::rest()
    };
    let po = find_pullout_with_base(device, block.electrodes, &base, &config.solver)?;
    let mut table = ResultTable::new(vec![
        "electrodes_internal0_external1",
        "v_pullout_V",
        "v_released_V",
        "v_contacted_V",
    ])?;
    table.push_row(vec![
        electrodes_code(block.electrodes),
        po.v_pullout,
        po.bracket.0,
        po.bracket.1,
    ])?;
    emit_csv(&table, &out.join("pullout.csv"))?;
    Ok(())
}

fn run_cv_curve(
    config: &ScenarioConfig,
    device: &ValidatedSpec,
    out: &Path,
) -> Result<(), RunError> {
    let block = config
        .cv_curve
        .as_ref()
        .ok_or(ConfigError::MissingBlock("cv_curve"))?;
    let grid = block.grid();
    let trace = trace_cv_curve(device, block.electrodes, &grid, &config.solver)?;
    let mut table = ResultTable::new(vec!["v_V", "peak_displacement_m", "contact_fraction"])?;
    for p in trace {
        table.push_row(vec![p.voltage, p.peak_displacement, p.contact_fraction])?;
    }
    emit_csv(&table, &out.join("cv_curve.csv"))?;
    Ok(())
}

fn run_ratio_sweep(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    let block = config
        .ratio_sweep
        .as_ref()
        .ok_or(ConfigError::MissingBlock("ratio_sweep"))?;
    let rows = sweep_ratio(&config.device, &block.ratios, &config.solver);
    let mut table = ResultTable::new(vec![
        "ratio",
        "v_pullin_V",
        "peak_displacement_m",
        "converged_flag",
    ])?;
    for row in rows {
        match row.result {
            Ok((v_pi, lift)) => table.push_row(vec![row.ratio, v_pi, lift, 1.0])?,
            Err(_) => table.push_row(vec![row.ratio, f64::NAN, f64::NAN, 0.0])?,
        }
    }
    emit_csv(&table, &out.join("ratio_sweep.csv"))?;
    Ok(())
}

fn run_unstick(
    config: &ScenarioConfig,
    device: &ValidatedSpec,
    out: &Path,
) -> Result<(), RunError> {
    let block = config
        .unstick
        .as_ref()
        .ok_or(ConfigError::MissingBlock("unstick"))?;
    let adhesion = AdhesionModel {
        pull_off_per_contact: block.adhesion,
    };
    let mut table = ResultTable::new(vec![
        "v_charge_V",
        "stuck_flag",
        "v_unstick_V",
        "min_holding_margin_N",
    ])?;
    for &charge in &block.charge_levels {
        match stuck_state(device, charge, &adhesion, &config.solver)? {
            StuckOutcome::Stuck(stuck) => {
                let margin = stuck
                    .holding_margin
                    .iter()
                    .fold(f64::INFINITY, |a, &m| a.min(m));
                let v = unstick_voltage(device, &stuck, block.v_ext_max, &config.solver)?;
                table.push_row(vec![charge, 1.0, v, margin])?;
            }
            StuckOutcome::NotStuck(_) => {
                table.push_row(vec![charge, 0.0, 0.0, f64::NAN])?;
            }
        }
    }
    emit_csv(&table, &out.join("unstick.csv"))?;
    Ok(())
}

fn run_table1(config: &ScenarioConfig, device: &ValidatedSpec, out: &Path) -> Result<(), RunError> {
    let gap = config
        .table1
        .as_ref()
        .and_then(|b| b.gap)
        .unwrap_or(device.gap());
    let mut table = ResultTable::new(vec!["archetype_id", "min_pressure_Pa"])?;
    let kinds = [
        ArchetypeKind::Cantilever,
        ArchetypeKind::ClampedClamped,
        ArchetypeKind::FreeMembrane,
        ArchetypeKind::FreeMembraneWithExternalHold,
    ];
    for (i, kind) in kinds.into_iter().enumerate() {
        let arch = BeamArchetype::new(kind, device.clone());
        let p = min_pressure_to_contact(&arch, gap, &config.solver)?;
        table.push_row(vec![i as f64, p])?;
    }
    emit_csv(&table, &out.join("table1.csv"))?;
    Ok(())
}

fn run_rf(config: &ScenarioConfig, device: &ValidatedSpec, out: &Path) -> Result<(), RunError> {
    let block = config.rf.as_ref().ok_or(ConfigError::MissingBlock("rf"))?;
    let r_down = match block.r_down {
        Some(r) => r,
        None => {
            // Mechanical bridge: down-state contact force through the
            // contact law.
            let drive = block.v_internal_drive.ok_or_else(|| {
                RunError::Usage("rf block needs either r_down or v_internal_drive".into())
            })?;
            let mesh = build_mesh(device, config.solver.n_elements)?;
            let mut warm = freeflex::fem::DeflectionField::zeros(mesh.n_nodes());
            let steps = 20usize;
            let mut force = 0.0;
            for k in 1..=steps {
                let v = drive * k as f64 / steps as f64;
                let r = freeflex::solver::equilibrium(
                    device,
                    &mesh,
                    &ActuationState::internal(v),
                    &config.solver,
                    &warm,
                )?;
                warm = r.deflection.clone();
                force = r.ohmic_contact_force();
            }
            if force <= 0.0 {
                return Err(RunError::Model(format!(
                    "no ohmic contact at drive {drive} V; cannot derive r_down"
                )));
            }
            contact_resistance(force, &block.contact_law)?
        }
    };
    let circuit = SwitchCircuit {
        r_down,
        l_down: block.l_down,
        c_up: block.c_up,
        z0: block.z0,
    };
    let freqs = block.grid();
    let down = shunt_sparams(&circuit, SwitchState::Down, &freqs)?;
    let up = shunt_sparams(&circuit, SwitchState::Up, &freqs)?;
    let mut table = ResultTable::new(vec![
        "freq_Hz",
        "s21_down_mag",
        "s21_down_db",
        "s11_down_mag",
        "s21_up_mag",
        "s21_up_db",
        "s11_up_mag",
    ])?;
    for i in 0..freqs.len() {
        table.push_row(vec![
            freqs[i],
            down.s21[i].norm(),
            down.s21_db(i),
            down.s11[i].norm(),
            up.s21[i].norm(),
            up.s21_db(i),
            up.s11[i].norm(),
        ])?;
    }
    emit_csv(&table, &out.join("rf.csv"))?;
    export_touchstone(&down, &out.join("rf_down.s2p"))?;
    export_touchstone(&up, &out.join("rf_up.s2p"))?;
    Ok(())
}

fn run_fit_rf(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    let block = config
        .fit_rf
        .as_ref()
        .ok_or(ConfigError::MissingBlock("fit_rf"))?;
    let circuit = fit_lumped(
        (block.isolation_db, block.isolation_freq),
        (block.insertion_db, block.insertion_freq),
        block.z0,
    )?;
    let down = shunt_sparams(&circuit, SwitchState::Down, &[block.isolation_freq])?;
    let up = shunt_sparams(&circuit, SwitchState::Up, &[block.insertion_freq])?;
    let mut table = ResultTable::new(vec![
        "r_down_ohm",
        "c_up_F",
        "achieved_isolation_db",
        "achieved_insertion_db",
    ])?;
    table.push_row(vec![
        circuit.r_down,
        circuit.c_up,
        down.s21_db(0),
        up.s21_db(0),
    ])?;
    emit_csv(&table, &out.join("fit_rf.csv"))?;
    Ok(())
}

fn write_manifest(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    let resolved = config.resolved_toml();
    let hash = config_hash(&resolved);
    let manifest = format!(
        "# freeflex run manifest\nconfig_hash = \"{hash:016x}\"\n\n\
         [provenance]\nnewton_tol = {:e}\nmax_newton_iters = {}\nv_step = {}\n\
         bisect_tol = {}\npenalty_stiffness = {:e}\nn_elements = {}\n\n\
         [table1_archetypes]\nids = \"0=cantilever, 1=clamped_clamped, 2=free_membrane, 3=free_membrane_with_external_hold\"\n\n\
         [resolved_config]\ntoml = '''\n{resolved}'''\n",
        config.solver.newton_tol,
        config.solver.max_newton_iters,
        config.solver.v_step,
        config.solver.bisect_tol,
        config.solver.penalty_stiffness,
        config.solver.n_elements,
    );
    std::fs::write(out.join("run_manifest.toml"), manifest).map_err(|e| RunError::Io(e.to_string()))
}
