fn main() {
    std::process::exit(hatepipe::cli::run(std::env::args_os()));
}
