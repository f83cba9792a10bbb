use clap::Parser;
use tokio::net::TcpListener;

#[derive(Parser)]
#[command(name = "heursynth-server", version, about = "Serve the solver-synthesis API over HTTP/JSON")]
struct Args {
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:8080", env = "HEURSYNTH_LISTEN")]
    listen: String,

    /// Log verbosity: error, warn, info, debug or trace.
    #[arg(long, default_value = "info", env = "HEURSYNTH_LOG")]
    log_level: tracing::Level,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    tracing_subscriber::fmt()
        .with_max_level(args.log_level)
        .with_writer(std::io::stderr)
        .init();
    let listener = TcpListener::bind(&args.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    heursynth_server::serve(listener).await?;
    Ok(())
}
