use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    match nfsip::cli::run(std::env::args_os(), &mut stdout.lock()) {
        Ok(code) => ExitCode::from(code.clamp(0, 255) as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
