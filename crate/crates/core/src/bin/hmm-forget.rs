fn main() {
    std::process::exit(hmm_forget::cli::main_with(std::env::args_os()));
}
