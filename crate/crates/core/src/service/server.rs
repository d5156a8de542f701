use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::protocol::{Request, Response, Status, HEADER_LEN, MAX_PAYLOAD, MAX_SCAN_RESULTS};
use crate::backend::{Backend, BackendError};

const POLL: Duration = Duration::from_millis(20);
/// How long a half-received frame may stall once shutdown has begun.
const DRAIN_GRACE: Duration = Duration::from_secs(2);

/// A running service. Dropping it without [`ServiceHandle::shutdown`] leaves
/// the threads running until process exit.
pub struct ServiceHandle {
    local_addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    requests: Arc<AtomicU64>,
    accept: Option<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Requests answered so far, over all connections.
    pub fn requests_served(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn is_stopping(&self) -> bool {
        self.shutdown.load(Ordering::Relaxed)
    }

    /// Stops accepting, lets every connection finish the request it is
    /// serving, then joins all threads.
    pub fn shutdown(mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

/// Binds `addr` and serves `backend` until shut down.
pub fn serve<B, A>(addr: A, backend: Arc<B>) -> io::Result<ServiceHandle>
where
    B: Backend + ?Sized + 'static,
    A: ToSocketAddrs,
{
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local_addr = listener.local_addr()?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let requests = Arc::new(AtomicU64::new(0));

    let accept = {
        let shutdown = shutdown.clone();
        let requests = requests.clone();
        thread::Builder::new()
            .name("kvmeta-accept".into())
            .spawn(move || accept_loop(listener, backend, shutdown, requests))?
    };

    tracing::info!(%local_addr, "metadata service listening");
    Ok(ServiceHandle {
        local_addr,
        shutdown,
        requests,
        accept: Some(accept),
    })
}

fn accept_loop<B: Backend + ?Sized + 'static>(
    listener: TcpListener,
    backend: Arc<B>,
    shutdown: Arc<AtomicBool>,
    requests: Arc<AtomicU64>,
) {
    let workers: Mutex<Vec<JoinHandle<()>>> = Mutex::new(Vec::new());
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let backend = backend.clone();
                let shutdown = shutdown.clone();
                let requests = requests.clone();
                let spawned = thread::Builder::new()
                    .name(format!("kvmeta-conn-{peer}"))
                    .spawn(move || {
                        if let Err(e) = serve_connection(stream, &*backend, &shutdown, &requests) {
                            tracing::debug!(%peer, error = %e, "connection closed with error");
                        }
                    });
                match spawned {
                    Ok(h) => {
                        let mut w = workers.lock().unwrap();
                        w.retain(|h| !h.is_finished());
                        w.push(h);
                    }
                    Err(e) => tracing::warn!(error = %e, "could not spawn connection thread"),
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                thread::sleep(Duration::from_millis(2))
            }
            Err(e) => {
                tracing::warn!(error = %e, "accept failed");
                thread::sleep(POLL);
            }
        }
    }
    for h in workers.into_inner().unwrap() {
        let _ = h.join();
    }
}

enum Fill {
    Done,
    /// Clean EOF, or shutdown, before the first byte.
    Idle,
}

/// Fills `buf`, polling the shutdown flag while waiting. Once the first byte
/// of a frame has arrived the read keeps going during shutdown, up to a
/// grace period.
fn fill(
    stream: &mut TcpStream,
    buf: &mut [u8],
    at_frame_start: bool,
    shutdown: &AtomicBool,
) -> io::Result<Fill> {
    let mut got = 0;
    let mut stop_seen: Option<Instant> = None;
    while got < buf.len() {
        match stream.read(&mut buf[got..]) {
            Ok(0) if got == 0 && at_frame_start => return Ok(Fill::Idle),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e)
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) =>
            {
                if shutdown.load(Ordering::Relaxed) {
                    if got == 0 && at_frame_start {
                        return Ok(Fill::Idle);
                    }
                    let since = *stop_seen.get_or_insert_with(Instant::now);
                    if since.elapsed() > DRAIN_GRACE {
                        return Err(io::ErrorKind::TimedOut.into());
                    }
                }
            }
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(Fill::Done)
}

fn discard(stream: &mut TcpStream, mut len: usize, shutdown: &AtomicBool) -> io::Result<()> {
    let mut sink = vec![0u8; 64 * 1024];
    while len > 0 {
        let n = len.min(sink.len());
        fill(stream, &mut sink[..n], false, shutdown)?;
        len -= n;
    }
    Ok(())
}

fn serve_connection<B: Backend + ?Sized>(
    mut stream: TcpStream,
    backend: &B,
    shutdown: &AtomicBool,
    requests: &AtomicU64,
) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(POLL))?;
    let mut header = [0u8; HEADER_LEN];
    loop {
        if let Fill::Idle = fill(&mut stream, &mut header, true, shutdown)? {
            return Ok(());
        }
        let len = u32::from_be_bytes([header[0], header[1], header[2], header[3]]) as usize;
        let opcode = header[4];
        let response = if len > MAX_PAYLOAD {
            discard(&mut stream, len, shutdown)?;
            Response::Error(Status::BadRequest)
        } else {
            let mut payload = vec![0u8; len];
            fill(&mut stream, &mut payload, false, shutdown)?;
            match Request::decode(opcode, &payload) {
                Ok(req) => dispatch(backend, req),
                Err(e) => {
                    tracing::debug!(error = %e, "rejecting malformed request");
                    Response::Error(Status::BadRequest)
                }
            }
        };
        stream.write_all(&response.encode(opcode))?;
        requests.fetch_add(1, Ordering::Relaxed);
    }
}

/// Executes one decoded request against the backend.
pub fn dispatch<B: Backend + ?Sized>(backend: &B, req: Request) -> Response {
    let result = match req {
        Request::Put { key, value } => backend
            .put(key, value)
            .map(|previous| Response::Put { previous }),
        Request::Get { key } => backend.get(&key).map(Response::Get),
        Request::Scan {
            start,
            end_exclusive,
            max_results,
        } => {
            let max = (max_results as usize).min(MAX_SCAN_RESULTS);
            backend
                .scan(&start, &end_exclusive, max)
                .map(Response::Scan)
        }
        Request::Delete { key } => backend
            .delete(&key)
            .map(|removed| Response::Delete { removed }),
        Request::Stats => backend.stats().map(Response::Stats),
    };
    result.unwrap_or_else(|e| match e {
        BackendError::BadRange | BackendError::BadRequest => Response::Error(Status::BadRequest),
        other => {
            tracing::warn!(error = %other, "backend failure");
            Response::Error(Status::Internal)
        }
    })
}
