//! HTTP service over the selection pipeline: dataset upload, Delphi session
//! lifecycle, pipeline runs and report retrieval, persisted as JSON files.

pub mod api;
pub mod error;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use api::{router, AppState};
pub use store::Store;

pub const ENV_DATA_DIR: &str = "DEWAT_DATA_DIR";
pub const ENV_LISTEN_ADDR: &str = "DEWAT_LISTEN_ADDR";
pub const ENV_FACILITATOR_TOKEN: &str = "DEWAT_FACILITATOR_TOKEN";

#[derive(Debug, Clone)]
pub struct Config {
    pub data_dir: PathBuf,
    pub listen: SocketAddr,
    pub facilitator_token: String,
}

impl Config {
    /// Reads the configuration from the environment. The data directory
    /// defaults to `./data` and the address to `127.0.0.1:8080`; the
    /// facilitator token has no default.
    pub fn from_env() -> Result<Config, String> {
        let data_dir = std::env::var_os(ENV_DATA_DIR)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("data"));
        let listen = match std::env::var(ENV_LISTEN_ADDR) {
            Ok(s) => s
                .parse()
                .map_err(|e| format!("{ENV_LISTEN_ADDR}=`{s}`: {e}"))?,
            Err(_) => SocketAddr::from(([127, 0, 0, 1], 8080)),
        };
        let facilitator_token = std::env::var(ENV_FACILITATOR_TOKEN)
            .ok()
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| format!("{ENV_FACILITATOR_TOKEN} must be set"))?;
        Ok(Config {
            data_dir,
            listen,
            facilitator_token,
        })
    }
}

/// Opens the store and builds the router.
pub fn app(
    data_dir: impl Into<PathBuf>,
    facilitator_token: impl Into<String>,
) -> std::io::Result<axum::Router> {
    let state = AppState {
        store: Store::open(data_dir)?,
        facilitator_token: facilitator_token.into(),
    };
    Ok(router(Arc::new(state)))
}
