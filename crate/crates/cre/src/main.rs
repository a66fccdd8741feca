use std::process::ExitCode;

fn main() -> ExitCode {
    cre::cli::main()
}
