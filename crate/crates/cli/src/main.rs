fn main() {
    std::process::exit(faf_cli::run(std::env::args_os()));
}
