fn main() {
    std::process::exit(mmv_core::cli::run(std::env::args_os()));
}
