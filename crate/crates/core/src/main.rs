fn main() {
    std::process::exit(dermalab::cli::main_with(std::env::args_os()));
}
