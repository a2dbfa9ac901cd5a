fn main() {
    std::process::exit(osmosis::cli::run(std::env::args_os()));
}
