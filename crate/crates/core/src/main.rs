fn main() {
    std::process::exit(qbd_poisson::cli::run(std::env::args_os()));
}
