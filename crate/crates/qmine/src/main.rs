fn main() {
    std::process::exit(qmine::cli::main_with_args(std::env::args_os()));
}
