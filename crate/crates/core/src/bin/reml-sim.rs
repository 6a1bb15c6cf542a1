fn main() {
    std::process::exit(halfsib_reml::cli::run(std::env::args_os()));
}
