fn main() {
    std::process::exit(hpm_cli::cli_main(std::env::args_os()));
}
