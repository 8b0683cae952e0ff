fn main() {
    std::process::exit(tomo_cli::app::main_from(std::env::args_os()));
}
