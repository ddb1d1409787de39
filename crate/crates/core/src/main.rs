fn main() {
    std::process::exit(clickbias::cli::run(std::env::args_os()));
}
