use std::process::ExitCode;

use clap::Parser;

use replicator_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap's own code for usage errors is 2, which here means "not converged".
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = cli.command.resolve().and_then(|cfg| run(&cfg));
    match outcome {
        Ok(report) => {
            for path in &report.outputs {
                println!("{}", path.display());
            }
            for r in report.residuals.iter().filter(|r| !r.converged) {
                eprintln!("not converged: {} (residual {:e})", r.label, r.residual);
            }
            ExitCode::from(report.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
