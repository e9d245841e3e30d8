fn main() {
    std::process::exit(opdyn_cli::run(std::env::args_os()));
}
