use std::io::{self, BufReader, BufWriter};
use std::net::{TcpListener, ToSocketAddrs};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use crate::session::{ServerConfig, Session, SessionSummary};

/// Serves one session over stdin/stdout.
pub fn serve_stdio(config: ServerConfig, id: &str) -> io::Result<SessionSummary> {
    let stdin = io::stdin();
    let stdout = io::stdout();
    Session::new(config, id).run(stdin.lock(), BufWriter::new(stdout.lock()))
}

/// Accepts TCP connections, one thread and one environment per session.
/// Returns after `max_sessions` sessions have finished, or never.
pub struct TcpServer {
    listener: TcpListener,
    config: Arc<ServerConfig>,
    counter: Arc<AtomicUsize>,
}

impl TcpServer {
    pub fn bind(addr: impl ToSocketAddrs, config: ServerConfig) -> io::Result<Self> {
        Ok(TcpServer { listener: TcpListener::bind(addr)?, config: Arc::new(config), counter: Arc::default() })
    }

    pub fn local_addr(&self) -> io::Result<std::net::SocketAddr> {
        self.listener.local_addr()
    }

    pub fn serve(&self, max_sessions: Option<usize>) -> io::Result<Vec<SessionSummary>> {
        let mut handles = Vec::new();
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            };
            stream.set_nodelay(true)?;
            let n = self.counter.fetch_add(1, Ordering::SeqCst);
            let config = (*self.config).clone();
            let reader = BufReader::new(stream.try_clone()?);
            handles.push(thread::spawn(move || Session::new(config, session_id(n)).run(reader, stream)));
            if max_sessions.is_some_and(|m| handles.len() >= m) {
                break;
            }
        }
        handles.into_iter().map(|h| h.join().map_err(|_| io::Error::other("session thread panicked"))?).collect()
    }
}

pub fn session_id(n: usize) -> String {
    format!("session-{n:04}")
}
