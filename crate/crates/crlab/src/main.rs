fn main() {
    std::process::exit(crlab::cli::main());
}
