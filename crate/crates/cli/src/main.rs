fn main() {
    std::process::exit(bpsplan_cli::cli::run(std::env::args_os()));
}
