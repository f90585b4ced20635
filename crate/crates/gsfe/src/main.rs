fn main() {
    std::process::exit(gsfe::cli::main_with(std::env::args_os()));
}
