fn main() {
    std::process::exit(lmg_qgt::cli::run(std::env::args_os()));
}
