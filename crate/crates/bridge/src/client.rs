use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};

use cyldrag_core::env::{ObservationSet, RunManifest, StepInfo};
use thiserror::Error;

use crate::frame::{read_frame, Frame};
use crate::protocol::{ClientMessage, ObservationRequest, ServerMessage, SessionInfo, WireObservation, MAX_FRAME, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("server error: {message}")]
    Server { message: String, fatal: bool },
    #[error("episode budget exhausted: {0}")]
    Done(String),
    #[error("unexpected reply: {0}")]
    Unexpected(String),
    #[error("connection closed")]
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
    pub observation: WireObservation,
}

/// Blocking client for the line protocol.
pub struct Client<R, W> {
    reader: R,
    writer: W,
    seq: u64,
}

impl Client<BufReader<TcpStream>, TcpStream> {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Client::new(BufReader::new(stream.try_clone()?), stream))
    }
}

impl<R: BufRead, W: Write> Client<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Client { reader, writer, seq: 0 }
    }

    pub fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    /// Sends a line verbatim and reads one reply.
    pub fn send_raw(&mut self, line: &[u8]) -> Result<ServerMessage, ClientError> {
        self.writer.write_all(line)?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        self.receive()
    }

    pub fn receive(&mut self) -> Result<ServerMessage, ClientError> {
        match read_frame(&mut self.reader, MAX_FRAME)? {
            Some(Frame::Line(b)) => serde_json::from_slice(&b).map_err(|e| ClientError::Unexpected(e.to_string())),
            Some(Frame::TooLong(n)) => Err(ClientError::Unexpected(format!("{n}-byte reply"))),
            None => Err(ClientError::Closed),
        }
    }

    pub fn send(&mut self, msg: &ClientMessage) -> Result<ServerMessage, ClientError> {
        let line = serde_json::to_vec(msg).map_err(io::Error::from)?;
        match self.send_raw(&line)? {
            ServerMessage::Error { message, fatal, .. } => Err(ClientError::Server { message, fatal }),
            ServerMessage::Done { reason, .. } => Err(ClientError::Done(reason)),
            m => Ok(m),
        }
    }

    pub fn hello(&mut self, name: &str) -> Result<SessionInfo, ClientError> {
        let seq = self.next_seq();
        match self.send(&ClientMessage::Hello { seq, version: PROTOCOL_VERSION, client: name.into() })? {
            ServerMessage::Hello { info, .. } => Ok(info),
            m => Err(unexpected(m)),
        }
    }

    pub fn config(&mut self, observation: ObservationRequest) -> Result<ObservationSet, ClientError> {
        let seq = self.next_seq();
        match self.send(&ClientMessage::Config { seq, observation })? {
            ServerMessage::Config { observation, .. } => Ok(observation),
            m => Err(unexpected(m)),
        }
    }

    pub fn reset(&mut self) -> Result<WireObservation, ClientError> {
        let seq = self.next_seq();
        match self.send(&ClientMessage::Reset { seq })? {
            ServerMessage::Obs { observation, .. } => Ok(observation),
            m => Err(unexpected(m)),
        }
    }

    pub fn act(&mut self, action: f64) -> Result<Transition, ClientError> {
        let seq = self.next_seq();
        match self.send(&ClientMessage::Act { seq, action })? {
            ServerMessage::Result { reward, done, info, observation, .. } => Ok(Transition { reward, done, info, observation }),
            m => Err(unexpected(m)),
        }
    }

    pub fn bye(&mut self) -> Result<RunManifest, ClientError> {
        let seq = self.next_seq();
        match self.send(&ClientMessage::Bye { seq })? {
            ServerMessage::Bye { manifest, .. } => Ok(manifest),
            m => Err(unexpected(m)),
        }
    }
}

fn unexpected(m: ServerMessage) -> ClientError {
    ClientError::Unexpected(serde_json::to_string(&m).unwrap_or_default())
}
