//! Command-line front end: run scenarios, check invariant gates on initial
//! data, and compare flow variants from identical starting states.

use clap::{Parser, Subcommand};
use hflow_core::ambient::{verify_structure_relations, AmbientSpace};
use hflow_core::diagnostics::{
    compute_record, q_field, special_identity_residuals, SPECIAL_Q_GATE,
};
use hflow_core::flow::{run_flow, velocity, FlowTrajectory, VelocityKind};
use hflow_core::io::{compare_csv_string, write_diagnostics_csv, write_snapshot, SnapshotFormat};
use hflow_core::scenario::{build_ambient, build_initial_surface, parse_scenario, validate_config};
use hflow_core::surface::{GeometryFields, SurfaceState, DEGENERACY_THRESHOLD};
use hflow_core::{GridDims, HflowError, Result, Scheme, ScenarioConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hflow",
    version,
    about = "Simulator for hyperkähler mean curvature flow (H-flow) of 2-tori in flat 4-tori"
)]
struct Cli {
    /// Directory for CSV and snapshot outputs (overrides the scenario's
    /// outputDir; defaults to the current directory).
    #[arg(long, global = true, env = "HFLOW_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,

    /// Override the scenario's grid with an N x N grid.
    #[arg(long, global = true, value_name = "N")]
    grid: Option<usize>,

    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and persist its diagnostics CSV and snapshots.
    Run { scenario: PathBuf },
    /// Build the scenario's initial state and verify every invariant gate.
    Check { scenario: PathBuf },
    /// Run several flow kinds from one initial state and emit a joined CSV.
    Compare {
        scenario: PathBuf,
        /// Comma-separated flow kinds (hflow_gradient, hflow_hamiltonian, mcf).
        #[arg(long, default_value = "hflow_gradient,mcf")]
        flows: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Run { scenario } => cmd_run(cli, scenario),
        Command::Check { scenario } => cmd_check(cli, scenario),
        Command::Compare { scenario, flows } => cmd_compare(cli, scenario, flows),
    }
}

fn load_scenario(cli: &Cli, path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HflowError::io(path, e))?;
    let mut config = parse_scenario(&text)?;
    if let Some(n) = cli.grid {
        config.grid = GridDims::new(n, n);
        validate_config(&config)?;
    }
    Ok(config)
}

fn output_dir(cli: &Cli, config: &ScenarioConfig) -> Result<PathBuf> {
    let dir = cli
        .output_dir
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| HflowError::io(&dir, e))?;
    Ok(dir)
}

fn write_snapshots(
    dir: &Path,
    name: &str,
    ambient: &AmbientSpace,
    snapshots: &[(usize, SurfaceState)],
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (step, state) in snapshots {
        let geom = GeometryFields::compute(state, ambient, DEGENERACY_THRESHOLD)?;
        let bin = dir.join(format!("{name}_snap_{step:06}.bin"));
        write_snapshot(state, &geom, ambient, &bin, SnapshotFormat::FlatBinary)?;
        let vtk = dir.join(format!("{name}_snap_{step:06}.vtk"));
        write_snapshot(state, &geom, ambient, &vtk, SnapshotFormat::VtkLegacy)?;
        written.push(bin);
        written.push(vtk);
    }
    Ok(written)
}

fn cmd_run(cli: &Cli, scenario: &Path) -> Result<ExitCode> {
    let config = load_scenario(cli, scenario)?;
    let dir = output_dir(cli, &config)?;
    let ambient = build_ambient(&config)?;
    let state = build_initial_surface(&config, &ambient)?;
    let run: FlowTrajectory = run_flow(
        &state,
        &ambient,
        config.flow_kind,
        &config.integrator,
        config.diagnostics_cadence,
        config.snapshot_cadence,
    )?;
    let csv_path = dir.join(format!("{}_diagnostics.csv", config.name));
    write_diagnostics_csv(&run.records, &csv_path)?;
    let snaps = write_snapshots(&dir, &config.name, &ambient, &run.snapshots)?;
    if !cli.quiet {
        let first = &run.records[0];
        let last = run.records.last().unwrap();
        println!(
            "{}: {} after {} steps, t = {:.6}  E {:.12} -> {:.12}  maxQ {:.3e}",
            config.name,
            run.status.label(),
            run.steps,
            run.final_state.time,
            first.energy,
            last.energy,
            run.records.iter().fold(0.0f64, |m, r| m.max(r.max_q)),
        );
        println!("wrote {}", csv_path.display());
        for p in &snaps {
            println!("wrote {}", p.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

struct GateTable {
    failed: bool,
    quiet: bool,
}

impl GateTable {
    fn gate(&mut self, name: &str, value: f64, gate: f64) {
        let ok = value <= gate;
        self.failed |= !ok;
        if !self.quiet || !ok {
            println!(
                "{name:<28} {value:>13.3e}  gate {gate:>9.1e}  {}",
                if ok { "pass" } else { "FAIL" }
            );
        }
    }

    fn info(&self, name: &str, detail: &str) {
        if !self.quiet {
            println!("{name:<28} {detail}");
        }
    }
}

fn cmd_check(cli: &Cli, scenario: &Path) -> Result<ExitCode> {
    let config = load_scenario(cli, scenario)?;
    let ambient = build_ambient(&config)?;
    let state = build_initial_surface(&config, &ambient)?;
    let geom = GeometryFields::compute(&state, &ambient, DEGENERACY_THRESHOLD)?;
    let mut table = GateTable {
        failed: false,
        quiet: cli.quiet,
    };

    let structure = verify_structure_relations(&ambient);
    table.gate("structure_residual", structure.max_residual(), 1e-12);
    table.info(
        "product_relation",
        if structure.product_sign == -1 {
            "I*J = -K"
        } else {
            "I*J = +K (wrong orientation)"
        },
    );
    table.failed |= structure.product_sign != -1;

    let mut pyth = 0.0f64;
    for k in 0..state.dims.len() {
        let sum: f64 = (0..3).map(|a| geom.pullbacks.n[a][k].powi(2)).sum();
        pyth = pyth.max((sum - geom.induced.lambda[k].powi(2)).abs());
    }
    table.gate("pythagorean", pyth, 1e-10);

    let q = q_field(&geom);
    let max_q = q.iter().fold(0.0f64, |m, &v| m.max(v));
    if matches!(config.rho_mode, hflow_core::RhoMode::PullbackOmega2) {
        table.gate("initial_max_q", max_q, 1e-12);
    } else {
        table.info("initial_max_q", &format!("{max_q:.3e} (ungated: constant rho)"));
    }

    if max_q <= SPECIAL_Q_GATE {
        let residuals = special_identity_residuals(&state, &geom, &ambient, SPECIAL_Q_GATE)?;
        table.gate(
            "frame_identity",
            residuals.get("frame_identity").unwrap_or(f64::INFINITY),
            1e-6,
        );
    } else {
        table.info(
            "frame_identity",
            "skipped: the state is not in the special class",
        );
    }

    let grad = velocity(&state, &geom, &ambient, VelocityKind::HflowGradient)?;
    let ham = velocity(&state, &geom, &ambient, VelocityKind::HflowHamiltonian)?;
    let mut gap = 0.0f64;
    for (a, b) in grad.iter().zip(&ham) {
        for c in 0..4 {
            gap = gap.max((a[c] - b[c]).abs());
        }
    }
    if config.scheme == Scheme::Spectral {
        table.gate("velocity_route_gap", gap, 1e-8);
    } else {
        table.info(
            "velocity_route_gap",
            &format!("{gap:.3e} (ungated: central4 truncation dominates)"),
        );
    }

    let record = compute_record(&state, &geom, &ambient, 0.0);
    table.info(
        "summary",
        &format!(
            "E = {:.12}, lambda in [{:.6}, {:.6}], minMu = {:.6}, area = {:.6}",
            record.energy, record.min_lambda, record.max_lambda, record.min_mu, record.total_area
        ),
    );

    if table.failed {
        if !cli.quiet {
            println!("check failed");
        }
        Ok(ExitCode::from(1))
    } else {
        if !cli.quiet {
            println!("check passed");
        }
        Ok(ExitCode::SUCCESS)
    }
}

fn flow_suffix(kind: VelocityKind) -> &'static str {
    match kind {
        VelocityKind::HflowGradient => "hflow",
        VelocityKind::HflowHamiltonian => "hflow_ham",
        VelocityKind::Mcf => "mcf",
    }
}

fn cmd_compare(cli: &Cli, scenario: &Path, flows: &str) -> Result<ExitCode> {
    let config = load_scenario(cli, scenario)?;
    let dir = output_dir(cli, &config)?;
    let kinds: Vec<VelocityKind> = flows
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_>>()?;
    if kinds.is_empty() {
        return Err(HflowError::config("--flows needs at least one flow kind"));
    }
    let ambient = build_ambient(&config)?;
    let state = build_initial_surface(&config, &ambient)?;
    let mut runs = Vec::new();
    for kind in &kinds {
        let run = run_flow(
            &state,
            &ambient,
            *kind,
            &config.integrator,
            config.diagnostics_cadence,
            0,
        )?;
        if !cli.quiet {
            println!(
                "{}: {} after {} steps, {} records",
                flow_suffix(*kind),
                run.status.label(),
                run.steps,
                run.records.len()
            );
        }
        runs.push((flow_suffix(*kind), run));
    }
    let labelled: Vec<(&str, &[hflow_core::DiagnosticsRecord])> = runs
        .iter()
        .map(|(label, run)| (*label, run.records.as_slice()))
        .collect();
    let text = compare_csv_string(&labelled)?;
    let path = dir.join(format!("{}_compare.csv", config.name));
    std::fs::write(&path, &text).map_err(|e| HflowError::io(&path, e))?;
    if !cli.quiet {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
