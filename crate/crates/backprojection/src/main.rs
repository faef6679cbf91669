fn main() {
    std::process::exit(backprojection::cli::run(std::env::args_os()));
}
