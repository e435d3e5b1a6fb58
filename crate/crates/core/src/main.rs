fn main() {
    std::process::exit(hermex::cli::main());
}
