fn main() {
    std::process::exit(spenra::cli::run(std::env::args_os()));
}
