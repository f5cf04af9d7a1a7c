fn main() {
    std::process::exit(riccdiff::cli::main_with_args(std::env::args_os()));
}
