//! Command-line entry point: simulation runs, frozen-symbol reports,
//! validation suites and snapshot export.

mod config;

use clap::{Parser, Subcommand, ValueEnum};
use peskin3d_core::membrane;
use peskin3d_core::sim::{self, RunStatus};
use peskin3d_core::spectral::SectorSpec;
use peskin3d_core::validate;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "peskin3d",
    about = "Boundary-integral simulator and spectral toolkit for an elastic membrane in Stokes flow",
    version
)]
struct Cli {
    /// Worker-thread cap (overrides PESKIN3D_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a time integration described by a JSON config file.
    Simulate {
        /// Path to the configuration file.
        config: PathBuf,
    },
    /// Emit the frozen-coefficient symbol report for a 3x2 matrix.
    Symbol {
        /// Matrix entries a11,a12,a21,a22,a31,a32.
        #[arg(long, value_delimiter = ',')]
        a: Vec<f64>,
        /// Law description, e.g. '{"kind":"hookean","k0":1.0}'.
        #[arg(long, default_value = r#"{"kind":"hookean","k0":1.0}"#)]
        law: String,
        /// Sector offset omega.
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        /// Sector angle delta (radians, in (0, pi/2)).
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
        delta: f64,
        /// FFT grid size per axis for the kernel diagnostics.
        #[arg(long, default_value_t = 512)]
        fft_n: usize,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a validation suite and print a TAP-style report.
    Validate {
        /// Suite selector.
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        /// Band limit used by resolution-dependent suites.
        #[arg(long, default_value_t = 16)]
        degree: usize,
    },
    /// Re-emit a snapshot file as CSV or as a coefficient JSON.
    Export {
        /// Snapshot CSV produced by `simulate`.
        state: PathBuf,
        /// Output format.
        #[arg(long, value_enum, default_value_t = ExportFormat::Coeffs)]
        format: ExportFormat,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Charts,
    Layer,
    Kernels,
    Symbol,
    Semigroup,
    All,
}

impl Suite {
    fn name(&self) -> &'static str {
        match self {
            Suite::Charts => "charts",
            Suite::Layer => "layer",
            Suite::Kernels => "kernels",
            Suite::Symbol => "symbol",
            Suite::Semigroup => "semigroup",
            Suite::All => "all",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Csv,
    Coeffs,
}

fn init_threads(flag: Option<usize>) {
    let count = flag.or_else(|| {
        std::env::var("PESKIN3D_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = count {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match cli.command {
        Command::Simulate { config } => cmd_simulate(&config),
        Command::Symbol {
            a,
            law,
            omega,
            delta,
            fft_n,
            out,
        } => cmd_symbol(&a, &law, omega, delta, fft_n, out.as_deref()),
        Command::Validate { suite, degree } => cmd_validate(suite, degree),
        Command::Export { state, format, out } => cmd_export(&state, format, out.as_deref()),
    }
}

fn cmd_simulate(config_path: &std::path::Path) -> ExitCode {
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return ExitCode::from(1);
        }
    };
    let cli_config = match config::parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let sim_config = match cli_config.to_sim_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let outdir = PathBuf::from(&cli_config.output_dir);
    if let Err(e) = std::fs::create_dir_all(&outdir) {
        eprintln!("error: cannot create {}: {e}", outdir.display());
        return ExitCode::from(1);
    }
    let result = match sim::run(&sim_config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = write_outputs(&outdir, &result) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    for (step, rel) in &result.energy_violations {
        eprintln!("warning: energy increased by {rel:.3e} (relative) at step {step}");
    }
    match result.status {
        RunStatus::Completed => {
            println!(
                "completed: t = {}, {} steps, {} snapshots",
                result.diagnostics.last().map(|d| d.time).unwrap_or(0.0),
                result.diagnostics.len().saturating_sub(1),
                result.snapshots.len()
            );
            ExitCode::SUCCESS
        }
        RunStatus::HaltedDegenerate => {
            println!(
                "halted (degenerate): {}",
                result.halt_reason.as_deref().unwrap_or("arc-chord collapse")
            );
            ExitCode::from(2)
        }
        RunStatus::HaltedStretch => {
            println!(
                "halted (stretch): {}",
                result.halt_reason.as_deref().unwrap_or("stretch out of range")
            );
            ExitCode::from(3)
        }
    }
}

fn write_outputs(outdir: &std::path::Path, result: &sim::RunResult) -> std::io::Result<()> {
    let mut diag = std::fs::File::create(outdir.join("diagnostics.csv"))?;
    writeln!(
        diag,
        "time,volume,energy,arc_chord_min,stretch_min,stretch_max,max_speed,dt"
    )?;
    for (i, d) in result.diagnostics.iter().enumerate() {
        let dt = result
            .diagnostics
            .get(i + 1)
            .map(|n| n.time - d.time)
            .unwrap_or(0.0);
        writeln!(
            diag,
            "{},{},{},{},{},{},{},{}",
            d.time,
            d.volume,
            d.energy,
            d.arc_chord_min,
            d.stretch_min,
            d.stretch_max,
            d.max_speed,
            dt
        )?;
    }
    for (step, state) in &result.snapshots {
        let mut f = std::fs::File::create(outdir.join(format!("snap_{step}.csv")))?;
        membrane::write_snapshot_csv(state, &mut f)?;
    }
    Ok(())
}

fn cmd_symbol(
    a: &[f64],
    law_text: &str,
    omega: f64,
    delta: f64,
    fft_n: usize,
    out: Option<&std::path::Path>,
) -> ExitCode {
    if a.len() != 6 {
        eprintln!("error: --a needs exactly 6 entries (row major 3x2)");
        return ExitCode::from(1);
    }
    let law_config: config::LawConfig = match serde_json::from_str(law_text) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot parse law: {e}");
            return ExitCode::from(1);
        }
    };
    let law = match law_config.build() {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if !(delta > 0.0 && delta < std::f64::consts::FRAC_PI_2) {
        eprintln!("error: delta must lie in (0, pi/2)");
        return ExitCode::from(1);
    }
    let matrix = nalgebra::Matrix3x2::new(a[0], a[1], a[2], a[3], a[4], a[5]);
    let sector = SectorSpec {
        omega,
        delta,
        samples: 200,
    };
    let report = match validate::build_symbol_report(matrix, &law, &sector, fft_n) {
        Ok(r) => r,
        Err(peskin3d_core::CoreError::RankDeficient { sigma2 }) => {
            eprintln!("error: rank-deficient matrix (sigma2 = {sigma2:e})");
            return ExitCode::from(4);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let write_result = match out {
        Some(path) => std::fs::write(path, &json),
        None => std::io::stdout().write_all(json.as_bytes()).map(|_| {
            println!();
        }),
    };
    if let Err(e) = write_result {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(1);
    }
    if report.violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} bound violations", report.violations.len());
        ExitCode::from(1)
    }
}

fn cmd_validate(suite: Suite, degree: usize) -> ExitCode {
    let results = match validate::run_suite(suite.name(), degree) {
        Some(r) => r,
        None => {
            eprintln!("error: unknown suite");
            return ExitCode::from(1);
        }
    };
    println!("1..{}", results.len());
    let mut all_ok = true;
    for (i, r) in results.iter().enumerate() {
        let tag = if r.passed { "ok" } else { "not ok" };
        println!("{tag} {} - {} # {}", i + 1, r.name, r.detail);
        all_ok &= r.passed;
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_export(
    state_path: &std::path::Path,
    format: ExportFormat,
    out: Option<&std::path::Path>,
) -> ExitCode {
    let file = match std::fs::File::open(state_path) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: cannot open {}: {e}", state_path.display());
            return ExitCode::from(1);
        }
    };
    let mut reader = std::io::BufReader::new(file);
    let state = match membrane::read_snapshot_csv(&mut reader) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot parse snapshot: {e}");
            return ExitCode::from(1);
        }
    };
    let mut buf: Vec<u8> = Vec::new();
    let encode = match format {
        ExportFormat::Csv => membrane::write_snapshot_csv(&state, &mut buf),
        ExportFormat::Coeffs => membrane::write_coeffs_json(&state, &mut buf),
    };
    if let Err(e) = encode {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let write_result = match out {
        Some(path) => std::fs::write(path, &buf),
        None => std::io::stdout().write_all(&buf),
    };
    if let Err(e) = write_result {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
