fn main() {
    std::process::exit(steinplan::cli::run_cli(std::env::args_os()));
}
