fn main() {
    std::process::exit(qths::cli::run_from_args());
}
