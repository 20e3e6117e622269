fn main() {
    std::process::exit(keyledger::harness::cli(std::env::args_os()));
}
