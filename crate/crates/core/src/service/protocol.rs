//! Binary frame format.
//!
//! Every frame is `u32-BE payload length ‖ opcode byte ‖ payload`. Response
//! frames echo the request opcode and their payload starts with a status
//! byte. All integers are big-endian.
//!
//! | opcode | request payload                      | OK response after status          |
//! |--------|--------------------------------------|-----------------------------------|
//! | PUT 1  | key(32) ‖ value(8)                   | had_prev u8 ‖ old value(8) if 1   |
//! | GET 2  | key(32)                              | value(8); NOT_FOUND has no body   |
//! | SCAN 3 | start(32) ‖ end_excl(32) ‖ max u32   | count u32 ‖ count × (key ‖ value) |
//! | DEL 4  | key(32)                              | removed u8                        |
//! | STATS 5| (empty)                              | 8 × u64 counters                  |

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::index::{IndexStats, MetaKey, MetaValue, KEY_LEN, VALUE_LEN};

pub const MAX_PAYLOAD: usize = 16 * 1024 * 1024;
pub const HEADER_LEN: usize = 5;
const ENTRY_LEN: usize = KEY_LEN + VALUE_LEN;
/// Largest scan result that fits one response frame.
pub const MAX_SCAN_RESULTS: usize = (MAX_PAYLOAD - 5) / ENTRY_LEN;

pub const OP_PUT: u8 = 1;
pub const OP_GET: u8 = 2;
pub const OP_SCAN: u8 = 3;
pub const OP_DELETE: u8 = 4;
pub const OP_STATS: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Status {
    Ok = 0,
    NotFound = 1,
    BadRequest = 2,
    Internal = 3,
}

impl Status {
    pub fn from_byte(b: u8) -> Option<Status> {
        match b {
            0 => Some(Status::Ok),
            1 => Some(Status::NotFound),
            2 => Some(Status::BadRequest),
            3 => Some(Status::Internal),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("unknown opcode {0:#04x}")]
    UnknownOpcode(u8),
    #[error("payload of {got} bytes, expected {expected} for opcode {opcode}")]
    BadLength {
        opcode: u8,
        expected: usize,
        got: usize,
    },
    #[error("frame payload of {0} bytes exceeds the 16 MiB limit")]
    Oversize(usize),
    #[error("unknown status byte {0}")]
    BadStatus(u8),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("response opcode {got} does not match request opcode {expected}")]
    OpcodeMismatch { expected: u8, got: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    Put {
        key: MetaKey,
        value: MetaValue,
    },
    Get {
        key: MetaKey,
    },
    Scan {
        start: MetaKey,
        end_exclusive: MetaKey,
        max_results: u32,
    },
    Delete {
        key: MetaKey,
    },
    Stats,
}

impl Request {
    pub fn opcode(&self) -> u8 {
        match self {
            Request::Put { .. } => OP_PUT,
            Request::Get { .. } => OP_GET,
            Request::Scan { .. } => OP_SCAN,
            Request::Delete { .. } => OP_DELETE,
            Request::Stats => OP_STATS,
        }
    }

    fn payload(&self) -> Vec<u8> {
        let mut p = Vec::with_capacity(2 * KEY_LEN + 4);
        match self {
            Request::Put { key, value } => {
                p.extend_from_slice(&key.0);
                p.extend_from_slice(&value.to_bytes());
            }
            Request::Get { key } | Request::Delete { key } => p.extend_from_slice(&key.0),
            Request::Scan {
                start,
                end_exclusive,
                max_results,
            } => {
                p.extend_from_slice(&start.0);
                p.extend_from_slice(&end_exclusive.0);
                p.extend_from_slice(&max_results.to_be_bytes());
            }
            Request::Stats => {}
        }
        p
    }

    /// The complete frame.
    pub fn encode(&self) -> Vec<u8> {
        frame(self.opcode(), &self.payload())
    }

    pub fn decode(opcode: u8, payload: &[u8]) -> Result<Request, ProtocolError> {
        let expect = |n: usize| {
            if payload.len() == n {
                Ok(())
            } else {
                Err(ProtocolError::BadLength {
                    opcode,
                    expected: n,
                    got: payload.len(),
                })
            }
        };
        match opcode {
            OP_PUT => {
                expect(KEY_LEN + VALUE_LEN)?;
                Ok(Request::Put {
                    key: key_at(payload, 0),
                    value: value_at(payload, KEY_LEN),
                })
            }
            OP_GET => {
                expect(KEY_LEN)?;
                Ok(Request::Get {
                    key: key_at(payload, 0),
                })
            }
            OP_SCAN => {
                expect(2 * KEY_LEN + 4)?;
                Ok(Request::Scan {
                    start: key_at(payload, 0),
                    end_exclusive: key_at(payload, KEY_LEN),
                    max_results: u32_at(payload, 2 * KEY_LEN),
                })
            }
            OP_DELETE => {
                expect(KEY_LEN)?;
                Ok(Request::Delete {
                    key: key_at(payload, 0),
                })
            }
            OP_STATS => {
                expect(0)?;
                Ok(Request::Stats)
            }
            other => Err(ProtocolError::UnknownOpcode(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Response {
    Put {
        previous: Option<MetaValue>,
    },
    /// `None` travels as status NOT_FOUND.
    Get(Option<MetaValue>),
    Scan(Vec<(MetaKey, MetaValue)>),
    Delete {
        removed: bool,
    },
    Stats(IndexStats),
    /// BAD_REQUEST or INTERNAL, with no body.
    Error(Status),
}

impl Response {
    pub fn status(&self) -> Status {
        match self {
            Response::Get(None) => Status::NotFound,
            Response::Error(s) => *s,
            _ => Status::Ok,
        }
    }

    fn payload(&self) -> Vec<u8> {
        let mut p = vec![self.status() as u8];
        match self {
            Response::Put { previous } => match previous {
                Some(v) => {
                    p.push(1);
                    p.extend_from_slice(&v.to_bytes());
                }
                None => p.push(0),
            },
            Response::Get(Some(v)) => p.extend_from_slice(&v.to_bytes()),
            Response::Get(None) | Response::Error(_) => {}
            Response::Scan(entries) => {
                p.reserve(4 + entries.len() * ENTRY_LEN);
                p.extend_from_slice(&(entries.len() as u32).to_be_bytes());
                for (k, v) in entries {
                    p.extend_from_slice(&k.0);
                    p.extend_from_slice(&v.to_bytes());
                }
            }
            Response::Delete { removed } => p.push(u8::from(*removed)),
            Response::Stats(st) => {
                for c in st.to_array() {
                    p.extend_from_slice(&c.to_be_bytes());
                }
            }
        }
        p
    }

    /// The complete frame, echoing `opcode`.
    pub fn encode(&self, opcode: u8) -> Vec<u8> {
        frame(opcode, &self.payload())
    }

    /// Decodes the response to a request with opcode `request_opcode`.
    pub fn decode(
        request_opcode: u8,
        opcode: u8,
        payload: &[u8],
    ) -> Result<Response, ProtocolError> {
        if opcode != request_opcode {
            return Err(ProtocolError::OpcodeMismatch {
                expected: request_opcode,
                got: opcode,
            });
        }
        let (&status_byte, body) = payload
            .split_first()
            .ok_or_else(|| ProtocolError::Malformed("missing status byte".into()))?;
        let status = Status::from_byte(status_byte).ok_or(ProtocolError::BadStatus(status_byte))?;
        let exact = |n: usize| {
            if body.len() == n {
                Ok(())
            } else {
                Err(ProtocolError::Malformed(format!(
                    "opcode {opcode}: body of {} bytes, expected {n}",
                    body.len()
                )))
            }
        };
        match status {
            Status::BadRequest | Status::Internal => {
                exact(0)?;
                return Ok(Response::Error(status));
            }
            Status::NotFound => {
                if opcode != OP_GET {
                    return Err(ProtocolError::Malformed(format!(
                        "NOT_FOUND is only valid for GET, got opcode {opcode}"
                    )));
                }
                exact(0)?;
                return Ok(Response::Get(None));
            }
            Status::Ok => {}
        }
        match opcode {
            OP_PUT => match body.first() {
                Some(0) => {
                    exact(1)?;
                    Ok(Response::Put { previous: None })
                }
                Some(1) => {
                    exact(1 + VALUE_LEN)?;
                    Ok(Response::Put {
                        previous: Some(value_at(body, 1)),
                    })
                }
                _ => Err(ProtocolError::Malformed("bad had_previous flag".into())),
            },
            OP_GET => {
                exact(VALUE_LEN)?;
                Ok(Response::Get(Some(value_at(body, 0))))
            }
            OP_SCAN => {
                if body.len() < 4 {
                    return Err(ProtocolError::Malformed(
                        "scan body shorter than count".into(),
                    ));
                }
                let count = u32_at(body, 0) as usize;
                exact(4 + count * ENTRY_LEN)?;
                let entries = (0..count)
                    .map(|i| {
                        let at = 4 + i * ENTRY_LEN;
                        (key_at(body, at), value_at(body, at + KEY_LEN))
                    })
                    .collect();
                Ok(Response::Scan(entries))
            }
            OP_DELETE => {
                exact(1)?;
                match body[0] {
                    0 => Ok(Response::Delete { removed: false }),
                    1 => Ok(Response::Delete { removed: true }),
                    b => Err(ProtocolError::Malformed(format!("bad removed flag {b}"))),
                }
            }
            OP_STATS => {
                exact(IndexStats::FIELDS * 8)?;
                let mut a = [0u64; IndexStats::FIELDS];
                for (i, slot) in a.iter_mut().enumerate() {
                    let mut b = [0u8; 8];
                    b.copy_from_slice(&body[i * 8..i * 8 + 8]);
                    *slot = u64::from_be_bytes(b);
                }
                Ok(Response::Stats(IndexStats::from_array(a)))
            }
            other => Err(ProtocolError::UnknownOpcode(other)),
        }
    }
}

pub fn frame(opcode: u8, payload: &[u8]) -> Vec<u8> {
    let mut f = Vec::with_capacity(HEADER_LEN + payload.len());
    f.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    f.push(opcode);
    f.extend_from_slice(payload);
    f
}

/// Splits a complete frame buffer into `(opcode, payload)`.
pub fn split_frame(buf: &[u8]) -> Result<(u8, &[u8]), ProtocolError> {
    if buf.len() < HEADER_LEN {
        return Err(ProtocolError::Malformed("frame shorter than header".into()));
    }
    let len = u32_at(buf, 0) as usize;
    if len > MAX_PAYLOAD {
        return Err(ProtocolError::Oversize(len));
    }
    if buf.len() != HEADER_LEN + len {
        return Err(ProtocolError::Malformed(format!(
            "frame declares {len} payload bytes but carries {}",
            buf.len() - HEADER_LEN
        )));
    }
    Ok((buf[4], &buf[HEADER_LEN..]))
}

/// Blocking read of one frame. `Ok(None)` on clean EOF before a header.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<(u8, Vec<u8>)>> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_be_bytes([header[0], header[1], header[2], header[3]]) as usize;
    if len > MAX_PAYLOAD {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            ProtocolError::Oversize(len),
        ));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Some((header[4], payload)))
}

pub fn write_frame<W: Write>(w: &mut W, bytes: &[u8]) -> io::Result<()> {
    w.write_all(bytes)?;
    w.flush()
}

fn key_at(b: &[u8], at: usize) -> MetaKey {
    let mut k = [0u8; KEY_LEN];
    k.copy_from_slice(&b[at..at + KEY_LEN]);
    MetaKey(k)
}

fn value_at(b: &[u8], at: usize) -> MetaValue {
    let mut v = [0u8; VALUE_LEN];
    v.copy_from_slice(&b[at..at + VALUE_LEN]);
    MetaValue::from_bytes(v)
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}
