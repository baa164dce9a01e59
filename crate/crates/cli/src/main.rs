fn main() {
    std::process::exit(maskcomp_cli::run(std::env::args_os()));
}
