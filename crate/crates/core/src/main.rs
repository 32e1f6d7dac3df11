fn main() {
    std::process::exit(bbdyn::harness::cli::run(std::env::args_os()));
}
