fn main() {
    std::process::exit(respgraph::cli::run(std::env::args_os()));
}
