fn main() {
    std::process::exit(gdft::cli::main_entry());
}
