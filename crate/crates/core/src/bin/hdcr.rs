fn main() {
    std::process::exit(hdcr::cli::main());
}
