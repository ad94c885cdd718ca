fn main() {
    std::process::exit(evframe_cli::run(std::env::args()))
}
