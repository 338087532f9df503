fn main() {
    std::process::exit(ems_charting::cli::main_with_args(std::env::args_os()));
}
