fn main() {
    std::process::exit(articflow::cli::run_from(std::env::args_os()));
}
