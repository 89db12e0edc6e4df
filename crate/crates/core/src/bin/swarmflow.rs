fn main() -> std::process::ExitCode {
    swarmflow::cli::main()
}
