use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rfimdi_core::{
    analyze, ideal_table, run_sweep, sampled_table, sweep::write_csv, verify_batch, AttackConfig,
    ChannelParams, Error, Mode, ModulusSettings, OptimizerSettings, PhaseSolver, Settings,
    SweepSpec, TableFile,
};

/// Key-rate analysis for reference-frame-independent MDI QKD with
/// uncharacterized qubits.
#[derive(Debug, Parser)]
#[command(name = "rfimdi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the channel-model table for a bit error rate and rotation.
    Simulate(SimulateArgs),
    /// Compute the key rate of a table file.
    Analyze(AnalyzeArgs),
    /// Key rate over a grid of rotation angles and bit error rates (CSV).
    Sweep(SweepArgs),
    /// Check the bounds against random explicit attacks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("angle").required(true).args(["theta", "theta_deg"])))]
struct SimulateArgs {
    /// Bit error rate in [0, 0.5].
    #[arg(long)]
    eb: f64,
    /// Rotation angle in radians.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Rotation angle in degrees, converted to radians before use.
    #[arg(long, allow_hyphen_values = true)]
    theta_deg: Option<f64>,
    /// Sample a finite-statistics table with this many trials per cell.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    #[arg(long, default_value = "rfi")]
    mode: Mode,
    /// Step of the upward sweep over the overlap modulus.
    #[arg(long, default_value_t = ModulusSettings::default().r_step)]
    r_step: f64,
    /// Angle step for the grid phase solver, in degrees.
    #[arg(long, default_value_t = ModulusSettings::default().angle_step_deg)]
    angle_step_deg: f64,
    /// Coefficient grid points per axis.
    #[arg(long, default_value_t = OptimizerSettings::default().grid_n)]
    grid_coeff: usize,
    #[arg(long, default_value = "arcs")]
    solver: PhaseSolver,
}

impl AnalysisArgs {
    fn settings(&self) -> anyhow::Result<Settings> {
        anyhow::ensure!(
            self.r_step > 0.0 && self.r_step <= 1.0,
            "--r-step must lie in (0, 1]"
        );
        anyhow::ensure!(
            self.angle_step_deg > 0.0 && self.angle_step_deg <= 90.0,
            "--angle-step-deg must lie in (0, 90]"
        );
        anyhow::ensure!(self.grid_coeff >= 2, "--grid-coeff must be at least 2");
        Ok(Settings {
            optimizer: OptimizerSettings {
                grid_n: self.grid_coeff,
                ..OptimizerSettings::default()
            },
            modulus: ModulusSettings {
                r_step: self.r_step,
                angle_step_deg: self.angle_step_deg,
                solver: self.solver,
            },
        })
    }
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    table: PathBuf,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Comma-separated bit error rates.
    #[arg(long, value_delimiter = ',', required = true)]
    eb_list: Vec<f64>,
    /// Angles spanning [0, pi] inclusive.
    #[arg(long, default_value_t = 33)]
    theta_steps: usize,
    /// Append (pi, 2pi) by mirroring the computed half.
    #[arg(long)]
    full_circle: bool,
    /// Worker threads; 0 uses one per processor.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    instances: usize,
    /// First seed; instance i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Print every instance's outcome.
    #[arg(long)]
    verbose: bool,
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Inconsistent(Error),
    Violation(usize),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Inconsistent(_) => 2,
            Failure::Violation(_) => 3,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Inconsistent(_) | Error::ContradictoryIntervals => Failure::Inconsistent(e),
            other => Failure::Usage(other.into()),
        }
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;
    Ok(pool.install(f))
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let theta = match (args.theta, args.theta_deg) {
        (Some(t), _) => t,
        (None, Some(d)) => d.to_radians(),
        (None, None) => unreachable!("clap requires one angle flag"),
    };
    let params = ChannelParams::new(args.eb, theta).map_err(|e| Failure::Usage(e.into()))?;
    let file = match args.shots {
        Some(shots) => sampled_table(params, shots, args.seed)
            .map_err(|e| Failure::Usage(e.into()))?
            .to_file(),
        None => TableFile::from(&ideal_table(params).map_err(|e| Failure::Usage(e.into()))?),
    };
    emit(
        args.out.as_deref(),
        format!("{}\n", file.to_json()).as_bytes(),
    )?;
    Ok(())
}

fn analyze_cmd(args: AnalyzeArgs) -> Result<(), Failure> {
    let settings = args.analysis.settings()?;
    let text = fs::read_to_string(&args.table)
        .with_context(|| format!("reading {}", args.table.display()))?;
    let table = TableFile::from_json(&text)
        .with_context(|| format!("parsing {}", args.table.display()))?
        .into_table()
        .map_err(|e| Failure::Usage(e.into()))?;
    let report = analyze(&table, args.analysis.mode, &settings)?;
    emit(
        args.out.as_deref(),
        format!("{}\n", report.to_json()).as_bytes(),
    )?;
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let settings = args.analysis.settings()?;
    if args.theta_steps < 2 {
        return Err(Failure::Usage(anyhow::anyhow!(
            "--theta-steps must be at least 2"
        )));
    }
    if let Some(e) = args.eb_list.iter().find(|e| !(0.0..=0.5).contains(*e)) {
        return Err(Failure::Usage(anyhow::anyhow!(
            "bit error rate {e} outside [0, 0.5]"
        )));
    }
    let spec = SweepSpec {
        e_b_values: args.eb_list,
        theta_steps: args.theta_steps,
        full_circle: args.full_circle,
        mode: args.analysis.mode,
        settings,
    };
    let rows = with_jobs(args.jobs, || run_sweep(&spec))??;
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).context("writing CSV")?;
    emit(args.out.as_deref(), &buf)?;
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    if args.instances == 0 {
        return Err(Failure::Usage(anyhow::anyhow!(
            "--instances must be at least 1"
        )));
    }
    let summary = with_jobs(args.jobs, || {
        verify_batch(
            args.instances,
            args.seed,
            &AttackConfig::default(),
            &Settings::default(),
        )
    })?;
    if args.verbose {
        for (seed, outcome) in &summary.outcomes {
            println!(
                "seed {seed}: {}",
                serde_json::to_string(outcome).context("encoding outcome")?
            );
        }
    }
    for (seed, msg) in &summary.violations {
        eprintln!("violation at seed {seed}:\n{msg}");
    }
    println!(
        "instances: {}, passed: {}, degenerate: {}, violations: {}",
        args.instances,
        summary.passed,
        summary.degenerate,
        summary.violations.len()
    );
    if summary.violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(summary.violations.len()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Usage(e) => eprintln!("error: {e:#}"),
                Failure::Inconsistent(e) => eprintln!("error: {e}"),
                Failure::Violation(n) => eprintln!("error: {n} soundness violation(s)"),
            }
            ExitCode::from(failure.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_failure_class() {
        assert_eq!(Failure::from(Error::Inconsistent(vec![])).code(), 2);
        assert_eq!(Failure::from(Error::ContradictoryIntervals).code(), 2);
        assert_eq!(Failure::from(Error::NoKeyEvents).code(), 1);
        assert_eq!(Failure::from(anyhow::anyhow!("io")).code(), 1);
        assert_eq!(Failure::Violation(1).code(), 3);
    }

    #[test]
    fn cli_definition_is_valid() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
