fn main() {
    std::process::exit(bilicut::cli::run(std::env::args_os()));
}
