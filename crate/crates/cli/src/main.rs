use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use surfdyn_cli::{load_config, run, Command, Report, Status};

#[derive(Parser)]
#[command(name = "surfdyn", version, about = "Numerical experiments on surface diffeomorphisms")]
struct Args {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `out` from the config, then `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            let rec = e.record();
            eprintln!("error: {}", rec.message);
            println!("{}", serde_json::to_string(&rec).unwrap_or_default());
            return ExitCode::from(1);
        }
    };
    let out = args
        .out
        .or_else(|| cfg.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match run(args.command, cfg, &out, args.seed) {
        Ok(report) => {
            summarize(&report);
            ExitCode::from(report.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Status::Error.exit_code() as u8)
        }
    }
}

fn summarize(r: &Report) {
    eprintln!("{}: {:?} in {:.3}s", r.command, r.status, r.wall_time_seconds);
    if let Some(e) = &r.error {
        eprintln!("error[{}]: {}", e.kind, e.message);
    }
}
