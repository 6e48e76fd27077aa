fn main() {
    std::process::exit(qcf::cli::run(std::env::args_os()));
}
