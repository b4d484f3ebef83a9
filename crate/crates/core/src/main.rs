fn main() {
    std::process::exit(heaping::cli::run(std::env::args_os()));
}
