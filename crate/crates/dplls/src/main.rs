fn main() {
    std::process::exit(dplls::cli::run(std::env::args_os()));
}
