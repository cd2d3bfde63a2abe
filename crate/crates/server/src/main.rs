//! Standalone service binary.

use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;
use waypoint_core::sandbox::load_sandbox;
use waypoint_server::{create_app, AppState};

#[derive(Parser)]
#[command(name = "waypoint-server", version, about = "Travel-planning harness service")]
struct Args {
    /// Directory holding flights.csv, hotels.csv, restaurants.csv, attractions.csv.
    #[arg(long)]
    sandbox: PathBuf,
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Shared budget for outbound model requests across all episodes.
    #[arg(long)]
    requests_per_minute: Option<u32>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .init();
    let args = Args::parse();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match runtime.block_on(serve(args)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

async fn serve(args: Args) -> Result<(), String> {
    let sandbox = load_sandbox(&args.sandbox).map_err(|e| e.to_string())?;
    let state = AppState::new(sandbox, args.requests_per_minute);
    let app = create_app(state);
    let listener = tokio::net::TcpListener::bind(&args.addr)
        .await
        .map_err(|e| format!("bind {}: {e}", args.addr))?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    println!("listening on http://{addr}");
    axum::serve(listener, app).await.map_err(|e| e.to_string())
}
