//! HTTP service for interactive matching sessions: experts fetch query
//! batches, confirm or revise the predicted labels, then verify the final
//! predictions and export the alignment.
//!
//! Each session is persisted as its run trace plus a small header, so a
//! restarted server resumes every session where it stopped.

pub mod api;
pub mod error;
pub mod session;
pub mod state;

use std::net::SocketAddr;

pub use api::router;
pub use error::{Result, ServiceError};
pub use session::{Answer, Phase, Session, SessionSettings};
pub use state::{AppState, TaskSummary, TaskUpload};

/// Serves `state` on `addr` until the process is stopped.
pub fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(state)).await
    })
}
