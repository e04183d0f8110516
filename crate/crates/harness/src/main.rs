use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    // Die quietly on a closed pipe (`ocvp params | head`) like other CLI tools
    // instead of panicking inside `println!`.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = ocvp_harness::cli::Cli::parse();
    match ocvp_harness::cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // One line, machine-parsable: `error: <cause chain>`.
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
