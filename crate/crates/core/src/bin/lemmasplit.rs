fn main() {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .format_target(false)
        .format_timestamp(None)
        .init();
    std::process::exit(lemmasplit::cli::run(std::env::args_os()));
}
