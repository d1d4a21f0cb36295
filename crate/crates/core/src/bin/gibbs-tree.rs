fn main() {
    std::process::exit(gibbs_tree::cli::run(std::env::args_os()));
}
