fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(cwta_core::cli::run_cli(&args));
}
