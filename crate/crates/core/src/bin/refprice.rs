fn main() -> std::process::ExitCode {
    refprice::cli::run()
}
