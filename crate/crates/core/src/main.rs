fn main() {
    std::process::exit(degrade::cli::run(std::env::args_os()));
}
