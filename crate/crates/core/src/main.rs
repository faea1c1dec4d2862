fn main() {
    std::process::exit(sncp::cli::run(std::env::args_os()));
}
