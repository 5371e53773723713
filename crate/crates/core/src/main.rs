fn main() {
    std::process::exit(optquad::cli::main_from(std::env::args_os()));
}
