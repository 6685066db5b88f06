fn main() -> std::process::ExitCode {
    curate::cli::main()
}
