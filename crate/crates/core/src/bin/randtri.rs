fn main() {
    std::process::exit(randtri::cli::main_with_args(std::env::args_os()));
}
