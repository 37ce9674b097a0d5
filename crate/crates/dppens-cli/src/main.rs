fn main() {
    std::process::exit(dppens_cli::cli::run(std::env::args_os()));
}
