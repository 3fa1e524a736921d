fn main() {
    std::process::exit(fixq::cli::run(std::env::args_os()));
}
