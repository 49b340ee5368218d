use std::io;
use std::process;

use cpt_sense_cli::{run, EXIT_USAGE};

fn main() {
    env_logger::init();
    if let Ok(raw) = std::env::var("CPT_SENSE_WORKERS") {
        let workers = match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => {
                eprintln!("error: CPT_SENSE_WORKERS must be a positive integer, got `{raw}`");
                process::exit(EXIT_USAGE);
            }
        };
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            eprintln!("error: {e}");
            process::exit(EXIT_USAGE);
        }
        log::debug!("using {workers} worker threads");
    }
    let code = run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock());
    process::exit(code);
}
