fn main() {
    std::process::exit(lt_core::cli::main());
}
