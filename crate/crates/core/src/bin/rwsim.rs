fn main() {
    std::process::exit(rwsim::cli::run_cli(std::env::args_os()));
}
