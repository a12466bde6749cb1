fn main() {
    std::process::exit(rsjd_cli::main_with(std::env::args_os()));
}
