fn main() {
    std::process::exit(piston_core::cli::main_with(std::env::args_os()));
}
