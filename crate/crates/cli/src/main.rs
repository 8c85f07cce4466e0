fn main() {
    std::process::exit(kconv_cli::run(std::env::args_os()));
}
