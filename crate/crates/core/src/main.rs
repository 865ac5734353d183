fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SCUC_LOG", "warn")).init();
    std::process::exit(scuc_core::cli::run_cli(std::env::args_os()));
}
