//! The virtual service: newline-delimited TCP by default, or HTTP with `--http`.

use std::fs::{File, OpenOptions};
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Router;
use chrono::{SecondsFormat, Utc};
use clap::{Args, ValueEnum};
use statemock_core::eval::UNRECOGNIZED;
use statemock_core::{Emulator, Mode, ModelBundle, SessionState, INITIAL};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::watch;
use tokio::task::JoinSet;

/// How long open connections get to finish after a shutdown signal.
const DRAIN_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnUnrecognized {
    /// Send nothing back.
    Drop,
    /// Answer with `{error:unrecognized}`.
    Error,
}

#[derive(Args)]
pub struct ServeArgs {
    /// Bundle directory written by `mine`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: String,
    #[arg(long, default_value = "det")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Map HTTP request bodies to messages instead of reading lines.
    #[arg(long)]
    http: bool,
    #[arg(long, value_enum, default_value = "error")]
    on_unrecognized: OnUnrecognized,
    /// Interaction log file; stderr when omitted.
    #[arg(long)]
    log: Option<PathBuf>,
}

struct Shared {
    emulator: Emulator,
    /// Record state is shared by every client; the non-key position is swapped in per connection.
    session: Mutex<SessionState>,
    on_unrecognized: OnUnrecognized,
    log: Mutex<Option<File>>,
}

impl Shared {
    /// Answers one request line. `None` means nothing goes back on the wire.
    fn answer(&self, line: &str, nonkey: &mut usize, peer: &str) -> Option<String> {
        let start = Instant::now();
        let result = {
            let mut s = self.session.lock().unwrap_or_else(|e| e.into_inner());
            std::mem::swap(&mut s.nonkey, nonkey);
            let r = self.emulator.generate_text(line, &mut s);
            std::mem::swap(&mut s.nonkey, nonkey);
            r
        };
        let micros = start.elapsed().as_secs_f64() * 1e6;
        let (out, itype) = match result {
            Ok(g) => (g.text, g.interaction_type.label()),
            Err(_) => (
                (self.on_unrecognized == OnUnrecognized::Error).then(|| UNRECOGNIZED.to_string()),
                "UNRECOGNIZED".to_string(),
            ),
        };
        self.log_line(peer, line, out.as_deref(), &itype, micros);
        out
    }

    fn log_line(
        &self,
        peer: &str,
        request: &str,
        response: Option<&str>,
        itype: &str,
        micros: f64,
    ) {
        let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
        let line = format!(
            "{}\t{peer}\t{}\t{}\t{itype}\t{micros:.1}us\n",
            Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true),
            clean(request),
            response.map(clean).unwrap_or_default(),
        );
        let mut log = self.log.lock().unwrap_or_else(|e| e.into_inner());
        match log.as_mut() {
            Some(f) => {
                let _ = f.write_all(line.as_bytes());
            }
            None => eprint!("{line}"),
        }
    }
}

pub fn serve(args: ServeArgs) -> Result<()> {
    let bundle = ModelBundle::load_dir(&args.model)?;
    let log = args
        .log
        .as_ref()
        .map(|p| {
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .with_context(|| format!("opening {}", p.display()))
        })
        .transpose()?;
    let shared = Arc::new(Shared {
        emulator: bundle.into_emulator(),
        session: Mutex::new(SessionState::new(args.mode, args.seed)),
        on_unrecognized: args.on_unrecognized,
        log: Mutex::new(log),
    });
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = TcpListener::bind(&args.listen)
            .await
            .with_context(|| format!("binding {}", args.listen))?;
        let addr = listener.local_addr()?;
        println!("listening on {addr}");
        let _ = std::io::Write::flush(&mut std::io::stdout());
        let (stop_tx, stop_rx) = watch::channel(false);
        tokio::spawn(async move {
            shutdown_signal().await;
            let _ = stop_tx.send(true);
        });
        if args.http {
            serve_http(listener, shared, stop_rx).await
        } else {
            serve_lines(listener, shared, stop_rx).await
        }
    })
}

async fn shutdown_signal() {
    let ctrl_c = tokio::signal::ctrl_c();
    #[cfg(unix)]
    {
        let mut term =
            match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
                Ok(t) => t,
                Err(_) => {
                    let _ = ctrl_c.await;
                    return;
                }
            };
        tokio::select! {
            _ = ctrl_c => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = ctrl_c.await;
    }
}

async fn serve_lines(
    listener: TcpListener,
    shared: Arc<Shared>,
    mut stop: watch::Receiver<bool>,
) -> Result<()> {
    let mut conns = JoinSet::new();
    loop {
        tokio::select! {
            _ = stop.changed() => break,
            accepted = listener.accept() => {
                let (stream, peer) = match accepted {
                    Ok(a) => a,
                    Err(_) => continue,
                };
                conns.spawn(connection(stream, peer, shared.clone(), stop.clone()));
            }
            Some(_) = conns.join_next(), if !conns.is_empty() => {}
        }
    }
    drop(listener);
    let _ = tokio::time::timeout(DRAIN_TIMEOUT, async {
        while conns.join_next().await.is_some() {}
    })
    .await;
    Ok(())
}

async fn connection(
    stream: TcpStream,
    peer: SocketAddr,
    shared: Arc<Shared>,
    mut stop: watch::Receiver<bool>,
) {
    let peer = peer.to_string();
    let (read, mut write) = stream.into_split();
    let mut reader = BufReader::new(read);
    let mut nonkey = INITIAL;
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = tokio::select! {
            _ = stop.changed() => break,
            n = reader.read_until(b'\n', &mut buf) => n,
        };
        match n {
            Ok(0) | Err(_) => break,
            Ok(_) => {}
        }
        let text = String::from_utf8_lossy(&buf);
        let line = text.trim_end_matches(['\n', '\r']);
        if line.is_empty() {
            continue;
        }
        if let Some(mut out) = shared.answer(line, &mut nonkey, &peer) {
            out.push('\n');
            if write.write_all(out.as_bytes()).await.is_err() {
                break;
            }
        }
    }
    let _ = write.flush().await;
}

async fn http_handler(State(shared): State<Arc<Shared>>, body: Bytes) -> Response {
    let text = String::from_utf8_lossy(&body);
    let line = text.trim_end_matches(['\n', '\r']);
    // HTTP has no connection session, so everyone shares the non-key position.
    let mut nonkey = shared.session.lock().map(|s| s.nonkey).unwrap_or(INITIAL);
    let out = shared.answer(line, &mut nonkey, "http");
    if let Ok(mut s) = shared.session.lock() {
        s.nonkey = nonkey;
    }
    match out {
        Some(t) if t == UNRECOGNIZED => (StatusCode::BAD_REQUEST, t).into_response(),
        Some(t) => (StatusCode::OK, t).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn serve_http(
    listener: TcpListener,
    shared: Arc<Shared>,
    mut stop: watch::Receiver<bool>,
) -> Result<()> {
    let app = Router::new().fallback(http_handler).with_state(shared);
    axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            let _ = stop.changed().await;
        })
        .await?;
    Ok(())
}
