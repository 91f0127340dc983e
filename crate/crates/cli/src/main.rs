fn main() {
    std::process::exit(lakefuse_cli::run(std::env::args_os()));
}
