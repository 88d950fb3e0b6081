fn main() {
    std::process::exit(bosonsim::cli::run(std::env::args_os()));
}
