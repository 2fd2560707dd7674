fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EVC_LOG", "warn")).init();
    std::process::exit(evc_core::cli::run_cli(std::env::args_os()));
}
