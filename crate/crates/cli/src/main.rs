fn main() {
    std::process::exit(amp_cli::run(std::env::args_os()));
}
