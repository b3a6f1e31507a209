#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Router;
use forge_core::crawler::sanitize_url_to_path;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn minisite() -> PathBuf {
    fixtures().join("minisite")
}

/// Serves a mirrored folder over HTTP: every request maps to the file the
/// crawler would store it under, so a mirror can be crawled again.
pub struct FixtureServer {
    pub base: String,
    pub port: u16,
    task: tokio::task::JoinHandle<()>,
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}

struct Site {
    root: PathBuf,
    robots: Option<String>,
}

async fn serve_file(State(site): State<Arc<Site>>, req: Request) -> Response {
    let uri = req.uri().to_string();
    if uri == "/robots.txt" {
        return match &site.robots {
            Some(text) => (StatusCode::OK, text.clone()).into_response(),
            None => StatusCode::NOT_FOUND.into_response(),
        };
    }
    let Ok(mapped) = sanitize_url_to_path(&format!("http://fixture{uri}")) else {
        return StatusCode::BAD_REQUEST.into_response();
    };
    let rel: PathBuf = mapped.components().skip(1).collect();
    let path = site.root.join(&rel);
    match tokio::fs::read(&path).await {
        Ok(bytes) => {
            let kind = match path.extension().and_then(|e| e.to_str()) {
                Some("css") => "text/css",
                Some("png") => "image/png",
                Some("jpg") => "image/jpeg",
                _ => "text/html",
            };
            ([(header::CONTENT_TYPE, kind)], bytes).into_response()
        }
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

pub async fn serve(root: &Path, robots: Option<&str>) -> FixtureServer {
    let site = Arc::new(Site { root: root.to_path_buf(), robots: robots.map(String::from) });
    let app = Router::new().fallback(serve_file).with_state(site);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let port = listener.local_addr().unwrap().port();
    let task = tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    FixtureServer { base: format!("http://127.0.0.1:{port}"), port, task }
}

/// The fixture project manifest pointed at a running server and a work dir.
pub fn project_manifest(server: &FixtureServer, work: &Path) -> forge_core::pipeline::ProjectManifest {
    let text = std::fs::read_to_string(fixtures().join("project.toml"))
        .unwrap()
        .replace("http://SITE", &server.base);
    let mut m = forge_core::pipeline::ProjectManifest::from_toml(&text, &fixtures()).unwrap();
    m.output.work_dir = work.to_path_buf();
    m
}
