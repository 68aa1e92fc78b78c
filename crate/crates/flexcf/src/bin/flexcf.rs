fn main() {
    std::process::exit(flexcf::cli::run(std::env::args_os()));
}
