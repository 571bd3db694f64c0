use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use idealcore::asymptotics::{core, oracle_core, CoreConfig};
use idealcore::harness::{
    self, list_catalog, parse_set, run_check, specs, ExperimentConfig, IdealSpec, MatrixSpec, OutputFormat, OutputSpec,
    SequenceSpec, Theorem,
};
use idealcore::regularity::{CheckConfig, Status, TestFamily};

#[derive(Parser)]
#[command(name = "idealcore", version, about = "Ideal cores and core-preserving matrices")]
struct Cli {
    /// Truncation horizon (rows for checks, prefix length for cores).
    #[arg(long, global = true, env = "IDEALCORE_DEFAULT_HORIZON")]
    horizon: Option<u64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    grid: Option<f64>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<String>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoremArg {
    St,
    Allen,
    Cfo,
    Leo,
}

#[derive(Subcommand)]
enum Command {
    /// Check a characterization for one matrix.
    Check {
        #[arg(long)]
        matrix: String,
        #[arg(long, default_value = "fin")]
        ideal_i: String,
        #[arg(long, default_value = "fin")]
        ideal_j: String,
        #[arg(long, value_enum)]
        theorem: TheoremArg,
        /// Test family as inline JSON or a file.
        #[arg(long)]
        family: Option<String>,
    },
    /// Run an experiment config.
    Experiment {
        #[arg(long)]
        config: String,
    },
    /// Core of a sequence with respect to an ideal.
    Core {
        #[arg(long)]
        sequence: String,
        #[arg(long, default_value = "fin")]
        ideal: String,
        /// Also print the symbolic core.
        #[arg(long)]
        oracle: bool,
    },
    /// Exact and empirical density of a set.
    Density {
        #[arg(long)]
        set: String,
    },
    /// List ideals, matrices and corpus entries.
    Catalog,
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {path}")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn check_cfg(cli: &Cli) -> CheckConfig {
    let d = CheckConfig::default();
    CheckConfig {
        horizon: cli.horizon.unwrap_or(d.horizon),
        tol: cli.tol.unwrap_or(d.tol),
        grid: cli.grid.unwrap_or(d.grid),
        theta: cli.theta.unwrap_or(d.theta),
    }
}

fn core_cfg(cli: &Cli) -> CoreConfig {
    let d = CoreConfig::default();
    CoreConfig {
        horizon: cli.horizon.unwrap_or(d.horizon),
        grid: cli.grid.unwrap_or(d.grid),
        theta: cli.theta.unwrap_or(d.theta),
        exact: true,
    }
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Check {
            matrix,
            ideal_i,
            ideal_j,
            theorem,
            family,
        } => {
            let a = MatrixSpec::parse(matrix)?.build()?;
            let i = IdealSpec::parse(ideal_i)?.build()?;
            let j = IdealSpec::parse(ideal_j)?.build()?;
            let seed = cli.seed.unwrap_or(0);
            let family = match family {
                Some(text) => {
                    let json = if text.trim_start().starts_with('{') {
                        text.clone()
                    } else {
                        std::fs::read_to_string(text).with_context(|| format!("reading {text}"))?
                    };
                    specs::from_json::<TestFamily>("family", &json)?
                }
                None => TestFamily::default_for(&i, seed),
            };
            let theorem = match theorem {
                TheoremArg::St => Theorem::St,
                TheoremArg::Allen => Theorem::Allen,
                TheoremArg::Cfo => Theorem::Cfo,
                TheoremArg::Leo => Theorem::Leo,
            };
            let verdict = run_check(theorem, &a, &i, &j, &family, &check_cfg(cli))?;
            emit(cli, &pretty(&verdict)?)?;
            Ok(match verdict.status {
                Status::Satisfied => 0,
                Status::Violated => 1,
                Status::Inconclusive => 2,
            })
        }
        Command::Experiment { config } => {
            let mut cfg = ExperimentConfig::from_file(config)?;
            let c = &mut cfg.cfg;
            if let Some(h) = cli.horizon {
                c.horizon = h;
            }
            c.tol = cli.tol.unwrap_or(c.tol);
            c.grid = cli.grid.unwrap_or(c.grid);
            c.theta = cli.theta.unwrap_or(c.theta);
            c.seed = cli.seed.unwrap_or(c.seed);
            let format = match cli.format {
                Some(Format::Csv) => OutputFormat::Csv,
                Some(Format::Json) => OutputFormat::Json,
                None => cfg.output.as_ref().map(|o| o.format).unwrap_or_default(),
            };
            if let Some(path) = &cli.output {
                cfg.output = Some(OutputSpec {
                    path: path.clone(),
                    format,
                });
            }
            let bundle = harness::run_suite(&cfg)?;
            for (id, secs) in &bundle.timings {
                eprintln!("{secs:>9.3}s  {id}");
            }
            if cfg.output.is_some() {
                let summary = json!({
                    "name": bundle.name,
                    "exit_code": bundle.exit_code,
                    "items": bundle.items.iter().map(|i| json!({"id": i.id, "kind": i.kind, "status": i.status})).collect::<Vec<_>>(),
                });
                print!("{}", pretty(&summary)?);
            } else {
                print!("{}", harness::render(&bundle, format)?);
            }
            Ok(bundle.exit_code as u8)
        }
        Command::Core {
            sequence,
            ideal,
            oracle,
        } => {
            let x = SequenceSpec::parse(sequence)?.build()?;
            let i = IdealSpec::parse(ideal)?.build()?;
            let grid = core(&x, &i, &core_cfg(cli))?;
            let mut out = json!({ "sequence": x.label(), "ideal": i.to_string(), "core": grid });
            if *oracle {
                let o = oracle_core(&x, &i)?;
                out["oracle"] = json!(o);
                out["deviation"] = json!(grid.deviation(&o));
            }
            emit(cli, &pretty(&out)?)?;
            Ok(0)
        }
        Command::Density { set } => {
            let s = parse_set(set)?;
            let horizon = cli.horizon.unwrap_or(100_000).max(2);
            let (lo, hi) = s.empirical_density(horizon);
            let exact = s.exact_density().ok().map(|d| {
                json!({
                    "description": d.to_string(),
                    "lower": d.lower().to_string(),
                    "upper": d.upper().to_string(),
                    "exists": matches!(d, idealcore::ideals::Density::Exact(_)),
                })
            });
            let out = json!({
                "set": s.to_string(),
                "exact": exact,
                "empirical": { "horizon": horizon, "lower": lo, "upper": hi },
            });
            emit(cli, &pretty(&out)?)?;
            Ok(0)
        }
        Command::Catalog => {
            emit(cli, &list_catalog())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
