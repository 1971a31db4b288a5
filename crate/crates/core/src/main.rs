fn main() {
    std::process::exit(slowbeam::cli::run_command(std::env::args_os()));
}
