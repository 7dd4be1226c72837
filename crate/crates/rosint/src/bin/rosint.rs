fn main() {
    std::process::exit(rosint::cli::main());
}
