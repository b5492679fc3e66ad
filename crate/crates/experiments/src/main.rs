use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;
use qcf_experiments::{execute, Cli, EXIT_USAGE};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let out = cli.command.common().out.clone();
    let report = match execute(cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("qcf-lab: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let written = match &out {
        Some(path) => File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            report.table.write_to(&mut w)?;
            w.flush()
        }),
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            report.table.write_to(&mut w).and_then(|_| w.flush())
        }
    };
    if let Err(e) = written {
        eprintln!("qcf-lab: cannot write output: {e}");
        return ExitCode::from(1);
    }
    for f in &report.failures {
        eprintln!("qcf-lab: {} [{}] {}", f.class, f.check, f.detail);
    }
    ExitCode::from(report.exit_code() as u8)
}
