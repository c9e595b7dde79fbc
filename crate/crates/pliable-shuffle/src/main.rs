fn main() {
    std::process::exit(pliable_shuffle::cli::run(std::env::args_os()));
}
