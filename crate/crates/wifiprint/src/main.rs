use std::process::ExitCode;

fn main() -> ExitCode {
    wifiprint::cli::main_entry()
}
