fn main() -> std::process::ExitCode {
    faulty_polar::cli::main()
}
