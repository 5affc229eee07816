fn main() -> std::process::ExitCode {
    lpu_core::cli::main()
}
