fn main() {
    std::process::exit(bloch_mca::cli::run(std::env::args_os()));
}
