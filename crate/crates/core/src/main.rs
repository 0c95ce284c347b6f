fn main() {
    std::process::exit(misisun::cli::run_from(std::env::args_os()));
}
