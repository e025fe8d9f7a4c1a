fn main() {
    std::process::exit(shapestyle::cli::run(std::env::args_os()));
}
