fn main() {
    std::process::exit(locppr_cli::run(std::env::args_os()));
}
