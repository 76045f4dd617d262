fn main() {
    std::process::exit(scu_core::cli::main_with_args(std::env::args_os()));
}
