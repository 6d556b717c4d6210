fn main() {
    std::process::exit(touchdrift::cli::run(std::env::args_os()));
}
