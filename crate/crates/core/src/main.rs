fn main() {
    std::process::exit(sphconv::cli::main_with_args(std::env::args_os()));
}
