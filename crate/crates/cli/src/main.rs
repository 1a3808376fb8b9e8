fn main() {
    std::process::exit(ttlab_cli::run_args(std::env::args_os()));
}
