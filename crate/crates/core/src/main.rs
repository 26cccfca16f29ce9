fn main() {
    std::process::exit(mariner_chan::cli::run(std::env::args_os()));
}
