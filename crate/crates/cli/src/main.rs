fn main() {
    std::process::exit(tdvar_cli::main_with(std::env::args_os()));
}
