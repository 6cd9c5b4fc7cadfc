fn main() {
    std::process::exit(treeforce::cli::run(std::env::args_os()));
}
