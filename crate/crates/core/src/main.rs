fn main() {
    std::process::exit(reachkit::cli::main_entry());
}
