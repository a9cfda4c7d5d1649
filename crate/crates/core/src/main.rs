fn main() {
    std::process::exit(nagsens::cli::main_entry());
}
