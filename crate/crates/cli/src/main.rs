fn main() {
    std::process::exit(tfree_cli::run(std::env::args_os()));
}
