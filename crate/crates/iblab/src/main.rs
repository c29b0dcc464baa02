fn main() {
    std::process::exit(iblab::cli::run(std::env::args_os()));
}
