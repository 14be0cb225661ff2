fn main() {
    std::process::exit(feedflow::harness::cli::run(std::env::args_os()));
}
