fn main() {
    std::process::exit(sigma_lattice::harness::run_command(std::env::args_os()));
}
