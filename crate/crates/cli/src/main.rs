fn main() {
    std::process::exit(eprsim_cli::main_with_args(std::env::args_os()));
}
