fn main() {
    std::process::exit(lingsel::cli::run(std::env::args_os()));
}
