fn main() {
    std::process::exit(rough_ldp::cli::run_from(std::env::args_os()));
}
