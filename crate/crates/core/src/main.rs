fn main() {
    std::process::exit(framecode::cli::run_cli(std::env::args_os()));
}
