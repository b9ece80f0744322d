fn main() {
    std::process::exit(evopath::cli::main_with_args(std::env::args_os()));
}
