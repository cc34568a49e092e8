use std::process::ExitCode;

use clap::Parser;

use deig::cli::{self, Args, StudyConfig};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let cfg = match StudyConfig::from_args(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if args.print_config {
        print!("{}", cfg.echo());
        return ExitCode::SUCCESS;
    }
    match cli::run(&cfg) {
        Ok(result) => {
            print!("{}", cli::summary_table(&result.table));
            println!("results written to {}", cfg.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
