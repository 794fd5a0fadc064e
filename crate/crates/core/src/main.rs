fn main() {
    std::process::exit(cdopt::cli::run(std::env::args_os()));
}
