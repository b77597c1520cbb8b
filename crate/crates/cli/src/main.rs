fn main() {
    std::process::exit(qsteer_cli::run(std::env::args().collect()));
}
