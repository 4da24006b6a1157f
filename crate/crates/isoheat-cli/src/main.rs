fn main() {
    std::process::exit(isoheat_cli::dispatch());
}
