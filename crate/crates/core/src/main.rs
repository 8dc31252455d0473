fn main() {
    std::process::exit(boostne::cli::main());
}
