fn main() {
    std::process::exit(lsf::cli::main_with_args(std::env::args_os()));
}
