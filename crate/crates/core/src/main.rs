fn main() {
    std::process::exit(flatlab::cli::main_with_args(std::env::args_os()));
}
