fn main() {
    std::process::exit(shapeopt::commands::run());
}
