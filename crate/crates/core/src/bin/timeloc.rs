fn main() {
    std::process::exit(timeloc::cli::main_from_args());
}
