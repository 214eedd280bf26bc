fn main() {
    std::process::exit(hybrid_attitude::cli::run_from_args(std::env::args_os()));
}
