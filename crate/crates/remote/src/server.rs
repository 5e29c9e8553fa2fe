use std::io;
use std::net::{SocketAddr, TcpListener};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use glyphfix::backends::protocol::{self, Capabilities, ErrorBody};
use glyphfix::backends::Ports;
use tokio::sync::oneshot;

const BODY_LIMIT: usize = 64 * 1024 * 1024;

/// A running server. Dropping the handle shuts it down.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Block until the server stops (it only stops on error).
    pub fn wait(mut self) -> io::Result<()> {
        // Keep the shutdown sender alive while waiting.
        let _keep = self.shutdown.take();
        match self.thread.take().map(JoinHandle::join) {
            Some(Ok(r)) => r,
            Some(Err(_)) => Err(io::Error::other("server thread panicked")),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
            if let Some(t) = self.thread.take() {
                let _ = t.join();
            }
        }
    }
}

async fn handle(State(ports): State<Arc<Ports>>, uri: Uri, body: Bytes) -> Response {
    let path = uri.path().to_owned();
    match tokio::task::spawn_blocking(move || protocol::dispatch(&ports, &path, &body)).await {
        Ok(Ok(bytes)) => ([(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Ok(Err(rejection)) => {
            let status = StatusCode::from_u16(rejection.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            (status, Json(rejection.body)).into_response()
        }
        Err(e) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(ErrorBody {
                error: format!("handler failed: {e}"),
            }),
        )
            .into_response(),
    }
}

async fn not_found(uri: Uri) -> Response {
    (
        StatusCode::NOT_FOUND,
        Json(ErrorBody {
            error: format!("no such endpoint {}", uri.path()),
        }),
    )
        .into_response()
}

fn router(ports: Ports) -> Router {
    let mut app = Router::new().route(
        protocol::CAPABILITIES,
        get(|| async { Json(Capabilities::all_concurrent()) }),
    );
    for path in protocol::ENDPOINTS {
        app = app.route(path, post(handle));
    }
    app.fallback(not_found)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(Arc::new(ports))
}

/// Bind `addr` (port 0 picks a free port) and serve `ports` on a background
/// thread.
pub fn serve(ports: Ports, addr: SocketAddr) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = thread::Builder::new()
        .name(format!("backend-server-{addr}"))
        .spawn(move || {
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)?;
                axum::serve(listener, router(ports))
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
            })
        })?;
    Ok(ServerHandle {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
