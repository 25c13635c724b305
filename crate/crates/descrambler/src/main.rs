fn main() {
    std::process::exit(descrambler::cli::run(std::env::args_os()));
}
