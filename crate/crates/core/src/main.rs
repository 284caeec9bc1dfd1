fn main() {
    std::process::exit(cha::cli::run(std::env::args_os()));
}
