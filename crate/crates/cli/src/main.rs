fn main() {
    pegfinder_cli::init_threads();
    let code = pegfinder_cli::main_with(std::env::args().collect());
    std::process::exit(code);
}
