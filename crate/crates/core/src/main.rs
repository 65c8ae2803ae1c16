fn main() {
    std::process::exit(sl_trust::cli::run(std::env::args_os()));
}
