fn main() {
    std::process::exit(textent::cli::dispatch(std::env::args_os()));
}
