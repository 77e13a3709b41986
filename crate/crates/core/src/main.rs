fn main() {
    std::process::exit(clt_lab::cli::run(std::env::args_os()));
}
