//! Length-prefixed request/response protocol for remote decisions and
//! segment sync.
//!
//! A frame is a 4-byte big-endian length followed by that many bytes of
//! UTF-8 text, at most [`MAX_FRAME`] bytes. Requests:
//!
//! | request                                  | response                              |
//! |------------------------------------------|---------------------------------------|
//! | `DECIDE <id> <FEASIBLE\|RESTRICTED>`      | `OK <decision> TRACE <ids,...>`        |
//! | `PUT_SEGMENT <index> <total>` + body frame | `OK STORED <index>`                   |
//! | `COMMIT`                                 | `OK GRAPH <nodes> <edges>`            |
//! | `PING`                                   | `OK PONG`                             |
//!
//! Requests from all connections are applied one at a time under a single
//! lock, so a `COMMIT` swap is never observed half-done.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex, PoisonError};
use std::thread;

use thiserror::Error;

use super::segment::{reconstruct, GraphSegment, ReconstructError};
use super::text::{deserialize_segment, serialize_segment};
use crate::reasoner::{Decision, Reasoner, ReasonerError};

pub const MAX_FRAME: usize = 1 << 20;
pub const DEFAULT_ENDPOINT: &str = "127.0.0.1:7070";

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame of {0} bytes exceeds the {MAX_FRAME} byte limit")]
    TooLarge(usize),
    #[error("connection closed mid-frame")]
    Truncated,
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> Result<(), FrameError> {
    if payload.len() > MAX_FRAME {
        return Err(FrameError::TooLarge(payload.len()));
    }
    let len = u32::try_from(payload.len()).expect("bounded by MAX_FRAME");
    // One write per frame: a split prefix/payload stalls on delayed ACKs.
    let mut buf = Vec::with_capacity(4 + payload.len());
    buf.extend_from_slice(&len.to_be_bytes());
    buf.extend_from_slice(payload);
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. `Ok(None)` on a clean close before the length prefix.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, FrameError> {
    let mut prefix = [0u8; 4];
    let mut got = 0;
    while got < prefix.len() {
        match r.read(&mut prefix[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(FrameError::Truncated),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_FRAME {
        return Err(FrameError::TooLarge(len));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FrameError::Truncated,
        _ => FrameError::Io(e),
    })?;
    Ok(Some(payload))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    Decide { obstacle: String, lane_feasible: bool },
    PutSegment { index: usize, total: usize },
    Commit,
    Ping,
}

impl Request {
    pub fn parse(text: &str) -> Result<Self, String> {
        let parts: Vec<&str> = text.split_whitespace().collect();
        match parts.as_slice() {
            ["DECIDE", obstacle, flag] => {
                let lane_feasible = match *flag {
                    "FEASIBLE" => true,
                    "RESTRICTED" => false,
                    other => return Err(format!("lane flag `{other}` is not FEASIBLE or RESTRICTED")),
                };
                Ok(Request::Decide { obstacle: obstacle.to_string(), lane_feasible })
            }
            ["DECIDE", ..] => Err("usage: DECIDE <obstacle_id> <FEASIBLE|RESTRICTED>".into()),
            ["PUT_SEGMENT", index, total] => {
                let index: usize = index.parse().map_err(|_| format!("bad segment index `{index}`"))?;
                let total: usize = total.parse().map_err(|_| format!("bad segment total `{total}`"))?;
                if index >= total {
                    return Err(format!("segment index {index} out of range for total {total}"));
                }
                Ok(Request::PutSegment { index, total })
            }
            ["PUT_SEGMENT", ..] => Err("usage: PUT_SEGMENT <index> <total>".into()),
            ["COMMIT"] => Ok(Request::Commit),
            ["PING"] => Ok(Request::Ping),
            ["COMMIT" | "PING", ..] => Err(format!("`{}` takes no arguments", parts[0])),
            [] => Err("empty request".into()),
            [cmd, ..] => Err(format!("unknown command `{cmd}`")),
        }
    }
}

struct ServerState {
    reasoner: Arc<Reasoner>,
    staged: BTreeMap<usize, GraphSegment>,
}

/// Longest detail echoed back; requests can be up to a frame long.
const MAX_DETAIL: usize = 256;

fn bad_request(detail: impl std::fmt::Display) -> String {
    let mut detail = detail.to_string().replace(['\n', '\r'], "; ");
    if detail.len() > MAX_DETAIL {
        let mut cut = MAX_DETAIL;
        while !detail.is_char_boundary(cut) {
            cut -= 1;
        }
        detail.truncate(cut);
        detail.push_str("...");
    }
    format!("ERR BAD_REQUEST {detail}")
}

impl ServerState {
    fn apply(&mut self, request: Request, body: Option<&[u8]>) -> String {
        match request {
            Request::Ping => "OK PONG".into(),
            Request::Decide { obstacle, lane_feasible } => match self.reasoner.decide(&obstacle, lane_feasible) {
                Ok((decision, trace)) => format!("OK {} TRACE {}", decision.token(), trace.joined()),
                Err(ReasonerError::UnknownObstacle(id)) => format!("ERR UNKNOWN_OBSTACLE {id}"),
                Err(e) => bad_request(e),
            },
            Request::PutSegment { index, total } => {
                let seg = match deserialize_segment(body.unwrap_or_default()) {
                    Ok(seg) => seg,
                    Err(e) => return bad_request(format!("segment body: {e}")),
                };
                if (seg.index, seg.total) != (index, total) {
                    return bad_request(format!(
                        "segment body is {} of {}, request said {index} of {total}",
                        seg.index, seg.total
                    ));
                }
                self.staged.insert(index, seg);
                format!("OK STORED {index}")
            }
            Request::Commit => {
                let segments: Vec<GraphSegment> = self.staged.values().cloned().collect();
                let graph = match reconstruct(&segments) {
                    Ok(g) => g,
                    Err(ReconstructError::Empty | ReconstructError::MissingSegment { .. }) => {
                        return "ERR INCOMPLETE_SEGMENTS".into()
                    }
                    Err(e) => return bad_request(e),
                };
                let (nodes, edges) = (graph.node_count(), graph.edge_count());
                match Reasoner::new(graph) {
                    Ok(reasoner) => {
                        self.reasoner = Arc::new(reasoner);
                        self.staged.clear();
                        format!("OK GRAPH {nodes} {edges}")
                    }
                    Err(e) => bad_request(e),
                }
            }
        }
    }
}

/// Decision server. Connections are handled on their own threads; request
/// processing is serialized.
pub struct Server {
    listener: TcpListener,
    state: Arc<Mutex<ServerState>>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, reasoner: Reasoner) -> io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            state: Arc::new(Mutex::new(ServerState { reasoner: Arc::new(reasoner), staged: BTreeMap::new() })),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections forever.
    pub fn run(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) if e.kind() == io::ErrorKind::ConnectionAborted => continue,
                Err(e) => return Err(e),
            };
            let _ = stream.set_nodelay(true);
            let state = Arc::clone(&self.state);
            thread::spawn(move || {
                // a failed write just means the peer went away
                let _ = handle_connection(stream, &state);
            });
        }
        Ok(())
    }

    pub fn spawn(self) -> thread::JoinHandle<io::Result<()>> {
        thread::spawn(move || self.run())
    }
}

enum Next {
    Frame(Vec<u8>),
    Close,
}

fn next_frame(stream: &mut TcpStream) -> Result<Next, FrameError> {
    match read_frame(stream) {
        Ok(Some(frame)) => Ok(Next::Frame(frame)),
        Ok(None) | Err(FrameError::Truncated) => Ok(Next::Close),
        Err(FrameError::TooLarge(_)) => {
            write_frame(stream, b"ERR FRAME_TOO_LARGE")?;
            Ok(Next::Close)
        }
        Err(e) => Err(e),
    }
}

fn handle_connection(mut stream: TcpStream, state: &Mutex<ServerState>) -> Result<(), FrameError> {
    loop {
        let Next::Frame(frame) = next_frame(&mut stream)? else {
            return Ok(());
        };
        let request = match std::str::from_utf8(&frame) {
            Ok(text) => Request::parse(text),
            Err(_) => Err("payload is not valid UTF-8".to_string()),
        };
        let request = match request {
            Ok(r) => r,
            Err(detail) => {
                write_frame(&mut stream, bad_request(detail).as_bytes())?;
                continue;
            }
        };
        let body = match request {
            Request::PutSegment { .. } => match next_frame(&mut stream)? {
                Next::Frame(body) => Some(body),
                Next::Close => return Ok(()),
            },
            _ => None,
        };
        let response = {
            let mut st = state.lock().unwrap_or_else(PoisonError::into_inner);
            st.apply(request, body.as_deref())
        };
        write_frame(&mut stream, response.as_bytes())?;
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("server closed the connection")]
    Closed,
    #[error("response is not valid UTF-8")]
    Utf8,
    #[error("unexpected response `{0}`")]
    Unexpected(String),
}

impl From<io::Error> for ClientError {
    fn from(e: io::Error) -> Self {
        ClientError::Frame(FrameError::Io(e))
    }
}

/// Synchronous client; one outstanding request at a time.
pub struct Client {
    stream: TcpStream,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self { stream })
    }

    /// Sends raw frames and reads one response frame.
    pub fn exchange(&mut self, frames: &[&[u8]]) -> Result<String, ClientError> {
        for f in frames {
            write_frame(&mut self.stream, f)?;
        }
        let frame = read_frame(&mut self.stream)?.ok_or(ClientError::Closed)?;
        String::from_utf8(frame).map_err(|_| ClientError::Utf8)
    }

    pub fn request(&mut self, message: &str) -> Result<String, ClientError> {
        self.exchange(&[message.as_bytes()])
    }

    pub fn put_segment(&mut self, seg: &GraphSegment) -> Result<String, ClientError> {
        let header = format!("PUT_SEGMENT {} {}", seg.index, seg.total);
        self.exchange(&[header.as_bytes(), serialize_segment(seg).as_bytes()])
    }

    pub fn decide(&mut self, obstacle: &str, lane_feasible: bool) -> Result<String, ClientError> {
        let flag = if lane_feasible { "FEASIBLE" } else { "RESTRICTED" };
        self.request(&format!("DECIDE {obstacle} {flag}"))
    }
}

/// Splits `OK <decision> TRACE <ids>` into its decision and trace ids.
pub fn parse_decide_response(response: &str) -> Result<(Decision, Vec<String>), ClientError> {
    let unexpected = || ClientError::Unexpected(response.to_string());
    let parts: Vec<&str> = response.split(' ').collect();
    match parts.as_slice() {
        ["OK", decision, "TRACE", trace] => {
            let decision = Decision::from_token(decision).ok_or_else(unexpected)?;
            Ok((decision, trace.split(',').map(String::from).collect()))
        }
        _ => Err(unexpected()),
    }
}
