fn main() {
    std::process::exit(orbilearn::cli::run(std::env::args_os()));
}
