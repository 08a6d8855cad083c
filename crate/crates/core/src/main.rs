fn main() {
    std::process::exit(perforated::cli::run(std::env::args_os()));
}
