fn main() {
    std::process::exit(han_core::cli::cli_main(std::env::args_os()));
}
