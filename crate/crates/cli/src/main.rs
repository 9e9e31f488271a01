fn main() {
    std::process::exit(bornlab_cli::cli_main(std::env::args_os()));
}
