use std::io::{self, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::Mutex;
use std::time::Duration;

use super::protocol::{read_frame, Request, Response, Status};
use crate::backend::{Backend, BackendError};
use crate::index::{IndexStats, MetaKey, MetaValue};

pub const DEFAULT_OP_TIMEOUT: Duration = Duration::from_secs(1);

/// Client side of the wire protocol.
///
/// Each call borrows a connection from an internal pool (opening one if the
/// pool is empty) and returns it after a clean exchange, so concurrent
/// workers end up with one connection each. A connection that saw any error
/// is dropped.
#[derive(Debug)]
pub struct RemoteBackend {
    addr: SocketAddr,
    timeout: Duration,
    pool: Mutex<Vec<TcpStream>>,
}

impl RemoteBackend {
    /// Connects with the default 1 s per-operation timeout.
    pub fn connect<A: ToSocketAddrs>(endpoint: A) -> Result<Self, BackendError> {
        Self::connect_with_timeout(endpoint, DEFAULT_OP_TIMEOUT)
    }

    pub fn connect_with_timeout<A: ToSocketAddrs>(
        endpoint: A,
        timeout: Duration,
    ) -> Result<Self, BackendError> {
        let addr = endpoint
            .to_socket_addrs()
            .map_err(|e| BackendError::Transport(e.to_string()))?
            .next()
            .ok_or_else(|| BackendError::Transport("endpoint resolved to no address".into()))?;
        let client = RemoteBackend {
            addr,
            timeout,
            pool: Mutex::new(Vec::new()),
        };
        let first = client.open()?;
        client.pool.lock().unwrap().push(first);
        Ok(client)
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    fn open(&self) -> Result<TcpStream, BackendError> {
        let s = TcpStream::connect_timeout(&self.addr, self.timeout).map_err(io_error)?;
        s.set_nodelay(true).map_err(io_error)?;
        s.set_read_timeout(Some(self.timeout)).map_err(io_error)?;
        s.set_write_timeout(Some(self.timeout)).map_err(io_error)?;
        Ok(s)
    }

    /// One request/response exchange.
    pub fn call(&self, req: &Request) -> Result<Response, BackendError> {
        let pooled = self.pool.lock().unwrap().pop();
        let mut stream = match pooled {
            Some(s) => s,
            None => self.open()?,
        };
        let opcode = req.opcode();
        stream.write_all(&req.encode()).map_err(io_error)?;
        let (resp_op, payload) = read_frame(&mut stream)
            .map_err(io_error)?
            .ok_or_else(|| BackendError::Transport("connection closed by server".into()))?;
        let resp = Response::decode(opcode, resp_op, &payload)
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        self.pool.lock().unwrap().push(stream);
        Ok(resp)
    }
}

fn io_error(e: io::Error) -> BackendError {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => BackendError::Timeout,
        io::ErrorKind::InvalidData => BackendError::Protocol(e.to_string()),
        _ => BackendError::Transport(e.to_string()),
    }
}

fn status_error(s: Status) -> BackendError {
    match s {
        Status::BadRequest => BackendError::BadRequest,
        _ => BackendError::Internal,
    }
}

fn unexpected(resp: Response) -> BackendError {
    match resp {
        Response::Error(s) => status_error(s),
        other => BackendError::Protocol(format!("unexpected response {other:?}")),
    }
}

impl Backend for RemoteBackend {
    fn put(&self, key: MetaKey, value: MetaValue) -> Result<Option<MetaValue>, BackendError> {
        match self.call(&Request::Put { key, value })? {
            Response::Put { previous } => Ok(previous),
            other => Err(unexpected(other)),
        }
    }

    fn get(&self, key: &MetaKey) -> Result<Option<MetaValue>, BackendError> {
        match self.call(&Request::Get { key: *key })? {
            Response::Get(v) => Ok(v),
            other => Err(unexpected(other)),
        }
    }

    fn scan(
        &self,
        start: &MetaKey,
        end_exclusive: &MetaKey,
        max_results: usize,
    ) -> Result<Vec<(MetaKey, MetaValue)>, BackendError> {
        if start >= end_exclusive {
            return Err(BackendError::BadRange);
        }
        let req = Request::Scan {
            start: *start,
            end_exclusive: *end_exclusive,
            max_results: u32::try_from(max_results).unwrap_or(u32::MAX),
        };
        match self.call(&req)? {
            Response::Scan(entries) => Ok(entries),
            other => Err(unexpected(other)),
        }
    }

    fn delete(&self, key: &MetaKey) -> Result<bool, BackendError> {
        match self.call(&Request::Delete { key: *key })? {
            Response::Delete { removed } => Ok(removed),
            other => Err(unexpected(other)),
        }
    }

    fn stats(&self) -> Result<IndexStats, BackendError> {
        match self.call(&Request::Stats)? {
            Response::Stats(s) => Ok(s),
            other => Err(unexpected(other)),
        }
    }

    fn describe(&self) -> String {
        format!("remote:{}", self.addr)
    }
}
