fn main() {
    std::process::exit(fpk::cli::run(std::env::args_os()));
}
