fn main() {
    std::process::exit(suas_damage::cli::run_cli(std::env::args_os()));
}
