//! HTTP session service over the lakefuse engine.
//!
//! A session walks one query through discover → align → integrate →
//! analyze. Each step is persisted under the configured state root before
//! the next one is accepted.

pub mod app;
pub mod config;
pub mod error;
pub mod provider;
pub mod routes;
pub mod session;

use std::sync::Arc;

pub use app::App;
pub use config::ServiceConfig;
pub use error::{ErrorBody, ServiceError};
pub use routes::router;
pub use session::{SessionState, Stage};

/// Serve on an already bound listener until the process is stopped.
pub async fn serve_on(listener: tokio::net::TcpListener, app: Arc<App>) -> std::io::Result<()> {
    axum::serve(listener, router(app)).await
}

/// Load the lake, bind `config.listen` and serve.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let listen = config.listen.clone();
    let app = Arc::new(tokio::task::spawn_blocking(move || App::new(config)).await.map_err(|e| ServiceError::Internal(e.to_string()))??);
    let listener = tokio::net::TcpListener::bind(&listen)
        .await
        .map_err(|e| ServiceError::Internal(format!("cannot bind {listen}: {e}")))?;
    eprintln!("lakefuse: serving {} tables on http://{}", app.lake().len(), listener.local_addr().map_or(listen, |a| a.to_string()));
    serve_on(listener, app)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))
}
