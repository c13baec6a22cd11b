fn main() {
    std::process::exit(descsel::cli::run(std::env::args_os()));
}
