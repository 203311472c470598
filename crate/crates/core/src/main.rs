fn main() {
    std::process::exit(repday::cli::main_with_args(std::env::args_os()));
}
