fn main() {
    std::process::exit(reqclass::cli::run(std::env::args_os()));
}
