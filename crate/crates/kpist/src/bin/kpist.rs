fn main() {
    std::process::exit(kpist::cli::run(std::env::args_os()));
}
