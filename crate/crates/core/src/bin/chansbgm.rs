fn main() -> std::process::ExitCode {
    chansbgm::cli::main_entry()
}
