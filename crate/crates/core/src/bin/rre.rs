fn main() {
    std::process::exit(rre_core::cli::run());
}
