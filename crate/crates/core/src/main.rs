fn main() {
    std::process::exit(nlps_aft::cli::main_with_args(std::env::args_os()));
}
