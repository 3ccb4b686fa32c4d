fn main() {
    std::process::exit(wavelab::cli::main());
}
