fn main() {
    std::process::exit(scenvec::cli::main_with(std::env::args_os()));
}
