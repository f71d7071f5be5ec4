fn main() {
    std::process::exit(vadtl::cli::run(std::env::args_os()));
}
