fn main() {
    std::process::exit(cav_nrc::cli::main_with_args(std::env::args_os()));
}
