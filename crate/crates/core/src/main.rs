fn main() {
    std::process::exit(tpspp::cli::run(std::env::args_os()));
}
