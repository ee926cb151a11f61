mod args;
mod commands;
mod output;

use clap::Parser;

use args::{Cli, Command};
use thoughtrag_core::config::{BackendKind, RunConfig};

fn resolve_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut config =
        RunConfig::load(cli.config.as_deref()).map_err(|e| format!("config: {e}"))?;

    if let Some(out_dir) = &cli.out_dir {
        config.out_dir = out_dir.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    if cli.strict {
        config.strict = true;
    }
    match cli.backend.as_deref() {
        Some("mock") => config.llm.backend = BackendKind::Mock,
        Some("http") => config.llm.backend = BackendKind::Http,
        _ => {}
    }
    if let Some(script) = &cli.mock_script {
        config.llm.mock_script = Some(script.clone());
        if cli.backend.is_none() {
            config.llm.backend = BackendKind::Mock;
        }
    }
    if let Some(base) = &cli.api_base {
        config.llm.api_base = base.clone();
    }
    if let Some(key) = &cli.api_key {
        config.llm.api_key = Some(key.clone());
    }
    if let Some(model) = &cli.model {
        config.llm.model = model.clone();
    }
    if let Some(top_k) = cli.top_k {
        config.bm25.top_k = top_k;
    }
    if let Some(k1) = cli.k1 {
        config.bm25.k1 = k1;
    }
    if let Some(b) = cli.b {
        config.bm25.b = b;
    }
    match cli.scale_strategy.as_deref() {
        Some("parallel") => config.scaling.strategy = thoughtrag_core::scaling::ScalingStrategy::Parallel,
        Some("iterative") => config.scaling.strategy = thoughtrag_core::scaling::ScalingStrategy::Iterative,
        _ => {}
    }
    if let Some(m) = cli.scale_m {
        config.scaling.m = m;
    }
    if let Some(t) = cli.scale_temperature {
        config.sampling.scaling.temperature = t;
    }
    if let Some(p) = cli.scale_top_p {
        config.sampling.scaling.top_p = p;
    }
    Ok(config)
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let config = match resolve_config(&cli) {
        Ok(config) => config,
        Err(message) => {
            eprintln!("error[config]: {message}");
            std::process::exit(1);
        }
    };

    let exit = match run(cli, config).await {
        Ok(()) => 0,
        Err(error) => {
            eprintln!("error[{}]: {}", error.category, error.message);
            1
        }
    };
    std::process::exit(exit);
}

pub struct CliError {
    pub category: String,
    pub message: String,
}

impl CliError {
    pub fn new(category: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            category: category.into(),
            message: message.into(),
        }
    }
}

impl From<thoughtrag_client::ClientError> for CliError {
    fn from(err: thoughtrag_client::ClientError) -> Self {
        Self::new(err.category().to_string(), err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::new("io", err.to_string())
    }
}

async fn run(cli: Cli, config: RunConfig) -> Result<(), CliError> {
    if let Command::Serve { addr } = &cli.command {
        return thoughtrag_server::serve_until_interrupted(config, addr)
            .await
            .map_err(|e| CliError::new("serve", e.to_string()));
    }

    // One-shot commands go through the HTTP API either way: against the
    // given server, or against an embedded one on an ephemeral port.
    let embedded = match &cli.server {
        Some(_) => None,
        None => Some(
            thoughtrag_server::start(config.clone(), "127.0.0.1:0")
                .await
                .map_err(|e| CliError::new("serve", e.to_string()))?,
        ),
    };
    let base_url = match &cli.server {
        Some(url) => url.clone(),
        None => embedded.as_ref().expect("embedded server started").base_url(),
    };

    let client = thoughtrag_client::Client::new(&base_url)
        .map_err(|e| CliError::new("transport", e.to_string()))?;
    let result = commands::dispatch(&cli, &config, &client).await;

    if let Some(server) = embedded {
        server.shutdown().await;
    }
    result
}
