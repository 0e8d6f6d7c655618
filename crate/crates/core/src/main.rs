use std::process::ExitCode;

use clap::Parser;
use rwre::config::{Cli, RunConfig};
use rwre::harness::run;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let env_seed = std::env::var("RWRE_SEED").ok();
    let cfg = match RunConfig::resolve(&cli, env_seed.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("rwre: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(out) => {
            for c in &out.checks {
                println!(
                    "{} {} = {:.6} (threshold {:.6})",
                    if c.pass { "ok  " } else { "FAIL" },
                    c.name,
                    c.value,
                    c.threshold
                );
            }
            println!("wrote {} files to {}", out.files.len(), out.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rwre: {} failed: {e}", cfg.command.name());
            ExitCode::from(1)
        }
    }
}
