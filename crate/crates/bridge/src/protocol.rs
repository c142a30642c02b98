//! Message types of the wire protocol.
//!
//! Every frame is one JSON object on one line with a `type` field and a
//! `seq` number that strictly increases in each direction. Server replies
//! carry `ack`, the `seq` of the request they answer.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use cyldrag_core::env::{Observation, ObservationSet, Preset, RunManifest, StepInfo, Task};
use cyldrag_core::field::{FlowField, FlowUnits};
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

/// Longest frame accepted, bytes. The 16×16 flow payload is about 3 KB.
pub const MAX_FRAME: usize = 1 << 20;

/// A flow field as base64 of little-endian f32, row-major, `(u, v)`
/// interleaved per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireFlow {
    pub w: usize,
    pub h: usize,
    pub data: String,
}

impl WireFlow {
    pub fn encode(field: &FlowField) -> Self {
        let bytes: Vec<u8> = field.to_interleaved_f32().iter().flat_map(|v| v.to_le_bytes()).collect();
        WireFlow { w: field.width, h: field.height, data: STANDARD.encode(bytes) }
    }

    pub fn decode(&self) -> Result<FlowField, String> {
        let bytes = STANDARD.decode(&self.data).map_err(|e| format!("flow payload: {e}"))?;
        if bytes.len() % 4 != 0 {
            return Err(format!("flow payload of {} bytes is not whole f32s", bytes.len()));
        }
        let values: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        FlowField::from_interleaved_f32(self.w, self.h, &values, FlowUnits::MetersPerSecond)
            .ok_or_else(|| format!("flow payload has {} values, expected {}", values.len(), 2 * self.w * self.h))
    }
}

/// An [`Observation`] with the flow field in wire form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct WireObservation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drag: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commanded_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_feedback: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_index: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<WireFlow>,
}

impl From<&Observation> for WireObservation {
    fn from(o: &Observation) -> Self {
        WireObservation {
            drag: o.drag,
            commanded_rate: o.commanded_rate,
            rate_feedback: o.rate_feedback,
            time_index: o.time_index,
            flow: o.flow.as_ref().map(WireFlow::encode),
        }
    }
}

impl WireObservation {
    /// Back to an [`Observation`]; flow values come back at f32 precision.
    pub fn decode(&self) -> Result<Observation, String> {
        Ok(Observation {
            drag: self.drag,
            commanded_rate: self.commanded_rate,
            rate_feedback: self.rate_feedback,
            time_index: self.time_index,
            flow: self.flow.as_ref().map(WireFlow::decode).transpose()?,
        })
    }
}

/// Observation set asked for in a `config` message: a preset name or an
/// explicit set. Either must be on the server's allowlist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservationRequest {
    Preset(String),
    Set(ObservationSet),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        seq: u64,
        version: u32,
        #[serde(default)]
        client: String,
    },
    Config {
        seq: u64,
        observation: ObservationRequest,
    },
    Reset {
        seq: u64,
    },
    Act {
        seq: u64,
        action: f64,
    },
    Bye {
        seq: u64,
    },
}

impl ClientMessage {
    pub fn seq(&self) -> u64 {
        match self {
            ClientMessage::Hello { seq, .. }
            | ClientMessage::Config { seq, .. }
            | ClientMessage::Reset { seq }
            | ClientMessage::Act { seq, .. }
            | ClientMessage::Bye { seq } => *seq,
        }
    }
}

/// What the agent needs to know about the environment it is connected to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session: String,
    pub episode_steps: usize,
    pub control_rate: f64,
    pub action_cap: f64,
    pub task: Task,
    pub observation: ObservationSet,
    /// Observation presets a `config` message may select.
    pub allowed: Vec<Preset>,
    pub pacing: Pacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pacing {
    /// One control step per control interval of wall time.
    Realtime,
    /// Free-running; virtual time is reported.
    #[default]
    Fast,
}

impl std::str::FromStr for Pacing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "realtime" => Ok(Pacing::Realtime),
            "fast" => Ok(Pacing::Fast),
            _ => Err(format!("unknown pacing {s:?} (realtime|fast)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        seq: u64,
        ack: u64,
        version: u32,
        info: SessionInfo,
    },
    Config {
        seq: u64,
        ack: u64,
        observation: ObservationSet,
    },
    Obs {
        seq: u64,
        ack: u64,
        episode: usize,
        observation: WireObservation,
    },
    Result {
        seq: u64,
        ack: u64,
        reward: f64,
        done: bool,
        info: StepInfo,
        observation: WireObservation,
    },
    /// The session's episode budget is spent; only `bye` is accepted.
    Done {
        seq: u64,
        ack: u64,
        reason: String,
        manifest: RunManifest,
    },
    Error {
        seq: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ack: Option<u64>,
        message: String,
        /// The server closes the session after sending this.
        fatal: bool,
    },
    Bye {
        seq: u64,
        ack: u64,
        manifest: RunManifest,
    },
}

impl ServerMessage {
    pub fn seq(&self) -> u64 {
        match self {
            ServerMessage::Hello { seq, .. }
            | ServerMessage::Config { seq, .. }
            | ServerMessage::Obs { seq, .. }
            | ServerMessage::Result { seq, .. }
            | ServerMessage::Done { seq, .. }
            | ServerMessage::Error { seq, .. }
            | ServerMessage::Bye { seq, .. } => *seq,
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, ServerMessage::Error { .. })
    }
}
