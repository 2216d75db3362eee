fn main() {
    std::process::exit(hetforest::cli::run(std::env::args_os()));
}
