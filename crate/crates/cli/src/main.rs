fn main() {
    std::process::exit(censored_svm_cli::run(std::env::args_os()));
}
