use env_logger::Env;
use ivegan::cli;

fn main() {
    env_logger::Builder::from_env(Env::default().filter_or(cli::LOG_ENV, "info"))
        .format_timestamp_secs()
        .init();
    std::process::exit(cli::run(std::env::args_os()));
}
