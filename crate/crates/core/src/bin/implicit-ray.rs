fn main() {
    std::process::exit(implicit_ray::cli::main_with(std::env::args_os()).code());
}
