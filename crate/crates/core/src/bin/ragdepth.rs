fn main() {
    std::process::exit(ragdepth::cli::main(std::env::args_os()))
}
