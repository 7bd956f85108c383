fn main() {
    std::process::exit(qsoliton_cli::cli::run(std::env::args().collect()));
}
