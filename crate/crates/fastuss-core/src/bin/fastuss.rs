fn main() {
    std::process::exit(fastuss_core::cli::run_cli(std::env::args()));
}
