fn main() {
    std::process::exit(locmob::cli::main_with_args(std::env::args_os()));
}
