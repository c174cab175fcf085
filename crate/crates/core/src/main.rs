fn main() {
    std::process::exit(gsim::cli::run(std::env::args_os()));
}
