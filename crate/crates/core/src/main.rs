fn main() {
    std::process::exit(doss::cli::run())
}
