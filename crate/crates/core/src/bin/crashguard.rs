fn main() {
    crashguard::cli::init_logging();
    std::process::exit(crashguard::cli::run_cli(std::env::args_os()));
}
