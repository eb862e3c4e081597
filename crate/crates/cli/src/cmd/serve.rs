use serde_json::json;
use softverify_proxy::{serve, ProxyConfig};

use super::{config_dir, read_json, resolve};
use crate::{CliError, Outcome, ServeArgs};

pub fn run(a: &ServeArgs) -> Result<Outcome, CliError> {
    let mut cfg: ProxyConfig = read_json(&a.config)?;
    if let Some(l) = &a.listen {
        cfg.listen = l.clone();
    }
    if let Some(p) = &cfg.templates_path {
        cfg.templates_path = Some(resolve(&config_dir(&a.config), p));
    }
    // surface config errors before binding
    cfg.translator()?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::new("runtime", e.to_string()))?;
    tracing::info!(listen = %cfg.listen, upstream = %cfg.upstream_url, "proxy starting");
    runtime.block_on(serve(&cfg, async {
        let _ = tokio::signal::ctrl_c().await;
    }))?;
    Ok(Outcome {
        report: json!({"listen": cfg.listen, "upstream_url": cfg.upstream_url, "stopped": true}),
        table: format!("proxy on {} stopped\n", cfg.listen),
        config: Some(a.config.clone()),
        ..Outcome::default()
    })
}
