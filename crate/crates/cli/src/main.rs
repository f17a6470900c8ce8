fn main() {
    std::process::exit(duplex_cli::run(std::env::args_os()));
}
