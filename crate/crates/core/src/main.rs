fn main() {
    std::process::exit(osc_lab::cli::run_from(std::env::args_os()));
}
