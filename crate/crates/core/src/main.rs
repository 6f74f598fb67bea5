fn main() {
    std::process::exit(aidmine::cli::run(std::env::args_os()));
}
