fn main() -> std::process::ExitCode {
    mark0_cli::cli::main()
}
