fn main() {
    std::process::exit(sphere_blasso::cli::run());
}
