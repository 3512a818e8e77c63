fn main() {
    std::process::exit(chameleon_casimir::cli::main_with_args(std::env::args_os()));
}
