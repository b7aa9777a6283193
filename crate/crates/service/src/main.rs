use std::path::PathBuf;

use autotour::config::Config;

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let explicit = std::env::args_os().nth(1).map(PathBuf::from);
    let config = match Config::load(explicit.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    let bind = config.service.bind.clone();
    let state = match autotour_service::AppState::new(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    let listener = match tokio::net::TcpListener::bind(&bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: bind {bind}: {e}");
            std::process::exit(2);
        }
    };
    log::info!("listening on {bind}");
    if let Err(e) = axum::serve(listener, autotour_service::router(state)).await {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
