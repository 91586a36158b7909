fn main() -> std::process::ExitCode {
    pcem::cli::main_with_args(std::env::args_os())
}
