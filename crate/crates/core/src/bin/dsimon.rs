use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dsimon::cli::{self, exit, BenchConfig};
use dsimon::instance::{generate, random_nonzero_shift, SimonFunction, TruthTable, APPENDIX_A_TT};
use dsimon::solver::{solve, Algorithm, SolveOptions};
use dsimon::{BitString, Error, Result};

#[derive(Parser)]
#[command(
    name = "dsimon",
    version,
    about = "Simon's problem over node-split oracles"
)]
struct Args {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    /// Suppress informational messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random Simon function as a truth table.
    Gen {
        #[arg(short = 'n', required_unless_present = "fixture")]
        n: Option<usize>,
        #[arg(short = 'm', required_unless_present = "fixture")]
        m: Option<usize>,
        /// Hidden shift; random nonzero when omitted.
        #[arg(short = 's')]
        s: Option<BitString>,
        /// Emit a bundled table instead of generating one.
        /// Any of -n, -m, -s given alongside must agree with it.
        #[arg(long, value_parser = ["appendix_a"])]
        fixture: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record the shift in the file and print it on stderr.
        #[arg(long)]
        reveal: bool,
    },
    /// Recover the hidden shift of a truth table.
    Solve {
        table: PathBuf,
        #[arg(short = 't', default_value_t = 0)]
        t: usize,
        #[arg(short = 'a', long = "algorithm", default_value = "distributed")]
        algorithm: Algorithm,
        #[arg(long)]
        max_runs: Option<u64>,
    },
    /// Exhaustively check the structural properties of a split.
    Verify {
        table: PathBuf,
        #[arg(short = 't')]
        t: usize,
    },
    /// Run a benchmark sweep described by a TOML file.
    Bench {
        config: PathBuf,
        /// Overrides the configured output stem.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("dsimon: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}

fn run(args: &Args) -> Result<i32> {
    match &args.command {
        Command::Gen {
            n,
            m,
            s,
            fixture,
            out,
            reveal,
        } => {
            let (text, shift) = if fixture.is_some() {
                let f = SimonFunction::appendix_a();
                let shift = f.hidden_s();
                if n.is_some_and(|n| n != f.n())
                    || m.is_some_and(|m| m != f.m())
                    || s.is_some_and(|s| s != shift)
                {
                    return Err(Error::InvalidArgument(format!(
                        "fixture has n={} m={} s={shift}",
                        f.n(),
                        f.m()
                    )));
                }
                let text = if *reveal {
                    f.table().to_text(Some(&shift))
                } else {
                    APPENDIX_A_TT.to_string()
                };
                (text, shift)
            } else {
                let (n, m) = (n.expect("required"), m.expect("required"));
                let shift = match s {
                    Some(s) if s.len() != n => {
                        return Err(Error::InvalidArgument(format!(
                            "shift {s} is not {n} bits long"
                        )))
                    }
                    Some(s) => *s,
                    None => random_nonzero_shift(
                        n,
                        &mut dsimon::rng::seeded(dsimon::rng::derive_seed(
                            args.seed,
                            &[dsimon::rng::label_tag("shift")],
                        )),
                    ),
                };
                let f = generate(n, m, shift, args.seed)?;
                (f.table().to_text(reveal.then_some(&shift)), shift)
            };
            if *reveal && !args.quiet {
                eprintln!("s = {shift}");
            }
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(exit::OK)
        }
        Command::Solve {
            table,
            t,
            algorithm,
            max_runs,
        } => {
            let table = cli::load_table(table)?;
            let f = SimonFunction::from_table(table)?;
            let options = SolveOptions {
                max_runs: *max_runs,
                ..SolveOptions::default()
            };
            let report = solve(&f, *t, *algorithm, args.seed, &options)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(if report.verified {
                exit::OK
            } else {
                exit::CHECK_FAILED
            })
        }
        Command::Verify { table, t } => {
            let table: TruthTable = cli::load_table(table)?;
            let report = cli::verify_table(&table, *t)?;
            if args.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                );
            } else {
                print!("{}", report.render());
            }
            if report.passed() {
                Ok(exit::OK)
            } else {
                if !args.quiet {
                    eprintln!("failed: {}", report.failed().join(", "));
                }
                Ok(exit::CHECK_FAILED)
            }
        }
        Command::Bench { config, out } => {
            let mut config = BenchConfig::load(config)?;
            if let Some(out) = out {
                config.output_path = out.clone();
            }
            let output = cli::run_bench(&config)?;
            if !args.quiet {
                eprintln!(
                    "wrote {} and {}",
                    output.jsonl_path.display(),
                    output.csv_path.display()
                );
            }
            if !args.json {
                print!("{}", output.csv);
            }
            Ok(if output.failures == 0 {
                exit::OK
            } else {
                exit::CHECK_FAILED
            })
        }
    }
}
