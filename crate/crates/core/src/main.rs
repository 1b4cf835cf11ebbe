fn main() {
    std::process::exit(xcpot_core::cli::main_entry(std::env::args_os()));
}
