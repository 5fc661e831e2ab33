fn main() {
    std::process::exit(mjp_cli::run(std::env::args_os()));
}
