fn main() -> std::process::ExitCode {
    midhaul::cli::main_with_args(std::env::args_os())
}
