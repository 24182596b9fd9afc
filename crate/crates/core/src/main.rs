fn main() {
    std::process::exit(finkey::cli::run(std::env::args_os()));
}
