fn main() {
    std::process::exit(vemcip::cli::run(std::env::args_os()));
}
