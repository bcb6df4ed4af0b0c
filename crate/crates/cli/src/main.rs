fn main() {
    std::process::exit(openhyp_cli::main_with_args(std::env::args_os()));
}
