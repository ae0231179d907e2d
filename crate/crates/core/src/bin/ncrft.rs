fn main() {
    std::process::exit(ncrft::cli::run(std::env::args_os()));
}
