fn main() {
    std::process::exit(spectrum_access::cli::run_cli(std::env::args_os()));
}
