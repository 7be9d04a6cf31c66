fn main() -> std::process::ExitCode {
    bbv_core::cli::main()
}
