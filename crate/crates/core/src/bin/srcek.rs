fn main() {
    std::process::exit(srcek::cli::main());
}
