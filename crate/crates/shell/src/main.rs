use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CAGEFORGE_LOG", "warn")).init();
    let code = cageforge_shell::cli::execute(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    let _ = std::io::stdout().flush();
    std::process::exit(code);
}
