use std::process::ExitCode;

use uwbsim::cli::{exit_code, parse_config, run_experiment, Parsed};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cfg = match parse_config(std::env::args_os()) {
        Ok(Parsed::Run(cfg)) => cfg,
        Ok(Parsed::Info(text)) => {
            print!("{text}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("uwbsim: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    match run_experiment(&cfg) {
        Ok(out) => {
            print!("{}", out.summary);
            for r in &out.results {
                println!("wrote {}", r.csv.display());
            }
            println!("wrote {}", out.plot_script.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("uwbsim: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
