use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irsloc::cli::{self, Command, ExperimentSpec, Scheme, SweepAxis};

#[derive(Parser)]
#[command(name = "irsloc", about = "IRS-aided localization experiments", version)]
struct CliArgs {
    #[command(subcommand)]
    command: CommandArg,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Allocation/association scheme.
    #[arg(long, value_enum, default_value_t = Scheme::Proposed)]
    scheme: Scheme,
    /// Monte Carlo trials (0 skips simulation where optional).
    #[arg(long, default_value_t = 0)]
    trials: usize,
    /// Master RNG seed; falls back to the LOC_SEED env var, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Results CSV path; a .manifest.json is written next to it.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum CommandArg {
    /// Per-target CRLB under the chosen scheme.
    Crlb(CommonArgs),
    /// Single-target time allocation over all BSs.
    OptimizeSingle(CommonArgs),
    /// Interference graph, pair choice, and slot packing.
    Associate(CommonArgs),
    /// Monte Carlo MLE verification of the CRLB.
    SimulateMle(CommonArgs),
    /// Sweep one axis: power, l, m, k, or re.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Sweep axis followed by its values, e.g. `--sweep power 0.1 0.5 1`.
        #[arg(long, num_args = 2.., required = true)]
        sweep: Vec<String>,
    },
    /// Slot and target counting bounds for the scenario's K and M.
    Bounds(CommonArgs),
}

fn seed_of(common: &CommonArgs) -> u64 {
    common.seed.unwrap_or_else(|| {
        std::env::var("LOC_SEED")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0)
    })
}

fn spec_of(command: Command, common: &CommonArgs, sweep: Option<(SweepAxis, Vec<f64>)>) -> ExperimentSpec {
    ExperimentSpec {
        command,
        scenario_path: common.scenario.clone(),
        scheme: common.scheme,
        sweep,
        trials: common.trials,
        seed: seed_of(common),
        out: common.out.clone(),
    }
}

fn parse_sweep(tokens: &[String]) -> Result<(SweepAxis, Vec<f64>), String> {
    let axis = match tokens[0].to_lowercase().as_str() {
        "power" => SweepAxis::Power,
        "l" => SweepAxis::L,
        "m" => SweepAxis::M,
        "k" => SweepAxis::K,
        "re" | "r_e" => SweepAxis::Re,
        other => return Err(format!("unknown sweep axis '{}'", other)),
    };
    let values = tokens[1..]
        .iter()
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad sweep value '{}'", t)))
        .collect::<Result<Vec<f64>, String>>()?;
    Ok((axis, values))
}

fn main() -> ExitCode {
    let args = CliArgs::parse();
    let spec = match &args.command {
        CommandArg::Crlb(c) => spec_of(Command::Crlb, c, None),
        CommandArg::OptimizeSingle(c) => spec_of(Command::OptimizeSingle, c, None),
        CommandArg::Associate(c) => spec_of(Command::Associate, c, None),
        CommandArg::SimulateMle(c) => spec_of(Command::SimulateMle, c, None),
        CommandArg::Bounds(c) => spec_of(Command::Bounds, c, None),
        CommandArg::Sweep { common, sweep } => match parse_sweep(sweep) {
            Ok(parsed) => spec_of(Command::Sweep, common, Some(parsed)),
            Err(message) => {
                eprintln!("{}", serde_json::json!({ "error": message }));
                return ExitCode::FAILURE;
            }
        },
    };
    match cli::run(&spec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
