fn main() {
    std::process::exit(softverify_cli::run(std::env::args_os()));
}
