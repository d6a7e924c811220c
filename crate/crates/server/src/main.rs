use std::net::SocketAddr;

use anyhow::Result;
use clap::{Parser, Subcommand};
use slant_server::cli::{self, ExportArgs, PlatformArgs, SimulateArgs};
use slant_server::{router, ApiConfig, AppState};

#[derive(Parser)]
#[command(name = "slant", version, about = "Annotation game server and study tools")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve the REST API, replaying the event log first.
    Serve {
        #[command(flatten)]
        platform: PlatformArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Bearer token for curator routes.
        #[arg(long, env = "SLANT_CURATOR_TOKEN")]
        curator_token: String,
        /// Requests per token per minute.
        #[arg(long, default_value_t = 120)]
        rate_cap: u32,
    },
    /// Run a simulated study and write the dataset, report and bootstrap histogram.
    Simulate(SimulateArgs),
    /// Replay an event log and write the dataset with its agreement report.
    Export(ExportArgs),
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    match Cli::parse().command {
        Cmd::Serve { platform, addr, curator_token, rate_cap } => {
            let p = platform.open()?;
            tracing::info!(log = %platform.log.display(), players = p.players().count(), "state replayed");
            let app = router(AppState::new(p, ApiConfig { curator_token, rate_cap }));
            let listener = tokio::net::TcpListener::bind(addr).await?;
            tracing::info!(%addr, "listening");
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
        }
        Cmd::Simulate(args) => {
            let report = tokio::task::spawn_blocking(move || cli::simulate(&args)).await??;
            println!(
                "{} annotations on {} sentences, alpha {:?}",
                report.annotations, report.sentences, report.alpha.alpha
            );
        }
        Cmd::Export(args) => {
            let out = args.out.clone();
            let n = tokio::task::spawn_blocking(move || cli::export(&args)).await??;
            println!("{n} records written to {}", out.display());
        }
    }
    Ok(())
}
