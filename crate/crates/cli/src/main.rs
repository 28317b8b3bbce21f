fn main() {
    std::process::exit(ctmc_bridge_cli::main_with_args(std::env::args_os()));
}
