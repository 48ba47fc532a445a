fn main() {
    std::process::exit(meshfit::cli::run(std::env::args_os()));
}
