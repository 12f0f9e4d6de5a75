fn main() {
    env_logger::init();
    std::process::exit(gridplan::cli::main());
}
