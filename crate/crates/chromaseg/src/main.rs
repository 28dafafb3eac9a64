fn main() {
    std::process::exit(chromaseg::cli::cli_main(std::env::args_os()));
}
