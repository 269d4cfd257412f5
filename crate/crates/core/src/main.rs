fn main() {
    std::process::exit(priorgate::cli::main(std::env::args_os()));
}
