fn main() {
    std::process::exit(ccr::cli::run());
}
