fn main() {
    std::process::exit(gcbha::cli::main_with(std::env::args_os()));
}
