fn main() {
    std::process::exit(inertia_lab::cli::run_from_env());
}
