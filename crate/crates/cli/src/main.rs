use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (code, output) = conflict_dss::run_command(std::env::args_os());
    if code == conflict_dss::EXIT_OK {
        print!("{output}");
    } else {
        eprint!("{output}");
    }
    ExitCode::from(code as u8)
}
