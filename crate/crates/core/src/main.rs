fn main() {
    std::process::exit(corn::cli::dispatch(std::env::args_os()));
}
