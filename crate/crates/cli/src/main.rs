fn main() {
    std::process::exit(lexattr_cli::run_from(std::env::args_os()));
}
