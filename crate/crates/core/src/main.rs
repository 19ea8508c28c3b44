fn main() {
    std::process::exit(mtadv::cli::main_with_args());
}
