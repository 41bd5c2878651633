fn main() {
    std::process::exit(robin_core::cli::main_with_args(std::env::args_os()));
}
