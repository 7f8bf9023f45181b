fn main() {
    std::process::exit(relu_cascade::cli::run(std::env::args_os()));
}
