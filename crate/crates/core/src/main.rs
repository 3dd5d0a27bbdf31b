fn main() {
    std::process::exit(adatta::cli::main_with_args(std::env::args_os()));
}
