fn main() {
    std::process::exit(nmor_beam::cli::run(std::env::args_os()));
}
