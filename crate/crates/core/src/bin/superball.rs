fn main() -> std::process::ExitCode {
    superball::cli::main()
}
