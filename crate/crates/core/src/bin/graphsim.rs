fn main() {
    std::process::exit(graphsim::cli::cli_dispatch(std::env::args_os()));
}
