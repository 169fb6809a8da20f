mod args;
mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use lplab::report::{to_json_string, write_json, write_ratio_csv_file};
use lplab::{LabError, Result};

use args::{Cli, Command};
use commands::{common_of, run, RunOutput};

fn csv_paths(base: &Path, output: &RunOutput) -> Vec<PathBuf> {
    if output.reports.len() == 1 {
        return vec![base.to_path_buf()];
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("samples");
    output
        .reports
        .iter()
        .map(|r| base.with_file_name(format!("{stem}-{}-p{}.csv", r.name.name(), r.p)))
        .collect()
}

fn execute(cli: &Cli) -> Result<bool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().map_err(|e| LabError::Config(e.to_string()))?;
    let output = pool.install(|| run(&cli.command))?;

    let common = common_of(&cli.command);
    match &common.out {
        Some(path) => write_json(path, &output)?,
        None => println!("{}", to_json_string(&output)?),
    }
    if let (Some(base), false) = (&common.csv, matches!(cli.command, Command::Partition(_))) {
        for (path, report) in csv_paths(base, &output).iter().zip(&output.reports) {
            write_ratio_csv_file(path, report)?;
        }
    }
    for failed in output.reports.iter().filter(|r| !r.pass) {
        eprintln!("FAIL {} p={}", failed.name.name(), failed.p);
    }
    for failed in output.invariants.iter().filter(|i| !i.pass) {
        eprintln!("FAIL {}: {} vs {}", failed.name, failed.value, failed.bound);
    }
    Ok(output.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
