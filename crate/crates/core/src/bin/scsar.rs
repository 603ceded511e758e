fn main() {
    std::process::exit(scsar::cli::run_cli(std::env::args_os()));
}
