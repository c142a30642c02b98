//! Line-delimited JSON bridge between the simulated channel and an external
//! agent process, over stdio or TCP.

pub mod client;
pub mod frame;
pub mod protocol;
pub mod server;
pub mod session;

pub use client::{Client, ClientError, Transition};
pub use frame::{read_frame, Frame};
pub use protocol::{ClientMessage, ObservationRequest, Pacing, ServerMessage, SessionInfo, WireFlow, WireObservation, MAX_FRAME, PROTOCOL_VERSION};
pub use server::{serve_stdio, session_id, TcpServer};
pub use session::{ServerConfig, Session, SessionSummary, STATED_BUDGET_STEPS};
