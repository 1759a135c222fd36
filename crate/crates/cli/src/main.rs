fn main() {
    std::process::exit(spcp_cli::run(std::env::args_os()));
}
