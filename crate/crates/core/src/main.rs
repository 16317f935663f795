fn main() {
    std::process::exit(egm::cli::main_from_env());
}
