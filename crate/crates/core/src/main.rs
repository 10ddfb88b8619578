fn main() {
    std::process::exit(specrec::cli::run_cli(std::env::args_os()));
}
