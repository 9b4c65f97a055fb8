fn main() {
    std::process::exit(curalab::cli::run());
}
