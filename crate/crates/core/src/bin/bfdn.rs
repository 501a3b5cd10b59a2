fn main() {
    std::process::exit(bfdn::cli::run(std::env::args_os()));
}
