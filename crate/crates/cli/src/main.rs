fn main() {
    std::process::exit(fkl_cli::run(std::env::args_os()));
}
