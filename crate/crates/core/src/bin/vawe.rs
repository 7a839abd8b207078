fn main() {
    std::process::exit(vawe::cli::main_with_args(std::env::args_os()));
}
