fn main() {
    puzzlekit_cli::init_threads();
    std::process::exit(puzzlekit_cli::run(std::env::args_os()));
}
