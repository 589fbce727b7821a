fn main() -> std::process::ExitCode {
    hybp::cli::main()
}
