fn main() {
    std::process::exit(elicit_cli::run(std::env::args_os()).code());
}
