//! Verification harness: configs, suites and reports.

pub mod bundled;
pub mod config;
pub mod report;
pub mod suites;

use std::time::Instant;

pub use config::{load_config, resolve, ConfigError, ManifoldConfig};
pub use report::{Record, Report};
pub use suites::{run_suite, RunOptions, Suite};

pub fn run(cfg: &ManifoldConfig, suite: Suite, opts: RunOptions) -> Report {
    let start = Instant::now();
    let records = run_suite(cfg, suite, opts);
    Report {
        config: cfg.name.clone(),
        description: cfg.description.clone(),
        suite: suite.name().to_string(),
        samples: opts.samples,
        seed: opts.seed,
        tol: opts.tol,
        records,
        elapsed: start.elapsed(),
    }
}
