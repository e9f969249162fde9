fn main() {
    std::process::exit(tqssa::cli::run());
}
