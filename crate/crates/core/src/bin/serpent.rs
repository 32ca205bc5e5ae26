use std::process::ExitCode;

fn main() -> ExitCode {
    let root = std::env::var_os("SERPENT_OUT").map(Into::into);
    let code = serpent::cli::main_with(std::env::args_os(), root);
    ExitCode::from(code as u8)
}
