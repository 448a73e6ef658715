fn main() {
    std::process::exit(polyaniso_cli::run(std::env::args_os()));
}
