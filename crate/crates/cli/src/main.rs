use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use courant_forge::{bundled, resolve, run, RunOptions, Suite};

#[derive(Parser)]
#[command(name = "courant-forge", version, about = "Numerical verification of generalized-geometry identities")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a suite against a config file or bundled config name.
    Run {
        #[arg(long)]
        config: String,
        #[arg(long)]
        suite: String,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        report: Format,
    },
    ListSuites,
    ListConfigs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Machine,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::ListSuites => {
            for s in Suite::ALL {
                println!("{:<11} {}", s.name(), s.description());
            }
            ExitCode::SUCCESS
        }
        Cmd::ListConfigs => {
            for name in bundled::names() {
                match courant_forge::ManifoldConfig::from_toml(bundled::source(name).expect("bundled")) {
                    Ok(c) => {
                        let suites: Vec<&str> = c.suites.iter().map(|s| s.name()).collect();
                        println!("{:<17} dim {}  [{}]  {}", name, c.dim(), suites.join(","), c.description);
                    }
                    Err(e) => println!("{name:<17} invalid: {e}"),
                }
            }
            ExitCode::SUCCESS
        }
        Cmd::Run {
            config,
            suite,
            samples,
            seed,
            tol,
            report,
        } => {
            let suite: Suite = match suite.parse() {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let cfg = match resolve(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let mut opts = RunOptions::from_config(&cfg);
            opts.samples = samples.unwrap_or(opts.samples);
            opts.seed = seed.unwrap_or(opts.seed);
            if let Some(t) = tol {
                if !(t > 0.0) {
                    eprintln!("error: --tol must be positive");
                    return ExitCode::from(2);
                }
                opts.tol = t;
            }
            let rep = run(&cfg, suite, opts);
            match report {
                Format::Text => print!("{}", rep.to_text()),
                Format::Machine => print!("{}", rep.to_machine()),
            }
            ExitCode::from(rep.exit_code() as u8)
        }
    }
}
