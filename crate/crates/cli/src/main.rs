fn main() { std::process::exit(finsler_cli::run(&std::env::args().collect::<Vec<_>>())); }
