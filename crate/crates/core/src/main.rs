fn main() {
    std::process::exit(rankdyn::cli::main_with_args(std::env::args_os()));
}
