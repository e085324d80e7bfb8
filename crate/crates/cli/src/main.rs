fn main() {
    std::process::exit(dropaudit_cli::run_cli(std::env::args_os()));
}
