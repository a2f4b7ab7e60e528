fn main() {
    env_logger::init();
    let code = ppm_stereo::cli::run_cli(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
