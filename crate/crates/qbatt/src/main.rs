use std::process::ExitCode;

fn main() -> ExitCode {
    qbatt::parallel::init_thread_pool();
    ExitCode::from(qbatt::cli::main_with_args(std::env::args_os()))
}
