fn main() {
    std::process::exit(qclust::cli::run(std::env::args_os()));
}
