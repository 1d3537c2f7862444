fn main() {
    std::process::exit(cbf_mild::cli::cli_main(std::env::args_os()));
}
