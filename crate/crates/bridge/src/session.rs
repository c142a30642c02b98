use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use cyldrag_core::env::{
    write_line, CylinderEnv, EnvConfig, EnvError, LogLine, ObservationSet, Preset, RunManifest,
};

use crate::frame::{read_frame, Frame};
use crate::protocol::{
    ClientMessage, ObservationRequest, Pacing, ServerMessage, SessionInfo, WireObservation, MAX_FRAME,
    PROTOCOL_VERSION,
};

/// Quoted step count of a 60-episode budget. 60 × 1800 is 108 000; the
/// manifest reports this next to the raw count.
pub const STATED_BUDGET_STEPS: u64 = 100_800;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub env: EnvConfig,
    /// Presets a client may switch to with `config`.
    pub allowed: Vec<Preset>,
    pub pacing: Pacing,
    /// Episode logs go to `<log_dir>/<session>/`.
    pub log_dir: Option<PathBuf>,
    /// Episodes per session before `reset` answers `done`.
    pub max_episodes: Option<usize>,
}

impl ServerConfig {
    pub fn new(env: EnvConfig) -> Self {
        ServerConfig { env, allowed: Preset::ALL.to_vec(), pacing: Pacing::Fast, log_dir: None, max_episodes: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitHello,
    /// Handshake done, no episode running.
    Ready,
    InEpisode,
    BudgetSpent,
}

/// Holds the step cadence to one control interval of wall time.
#[derive(Debug)]
struct Pacer {
    interval: Option<Duration>,
    next: Option<Instant>,
}

impl Pacer {
    fn wait(&mut self) {
        let Some(interval) = self.interval else { return };
        let now = Instant::now();
        self.next = Some(match self.next {
            Some(t) if t > now => {
                std::thread::sleep(t - now);
                t + interval
            }
            _ => now + interval,
        });
    }

    fn restart(&mut self) {
        self.next = None;
    }
}

/// How a session ended.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub id: String,
    pub manifest: RunManifest,
    pub frames_in: u64,
    pub errors_sent: u64,
    /// The client said `bye` (as opposed to dropping or being dropped).
    pub clean: bool,
}

/// One agent connection driving one environment instance.
pub struct Session {
    config: ServerConfig,
    id: String,
    phase: Phase,
    env: Option<CylinderEnv>,
    observation: ObservationSet,
    out_seq: u64,
    in_seq: Option<u64>,
    log: Option<BufWriter<File>>,
    pacer: Pacer,
    started: Instant,
    frames_in: u64,
    errors_sent: u64,
}

impl Session {
    pub fn new(config: ServerConfig, id: impl Into<String>) -> Self {
        let interval = match config.pacing {
            Pacing::Realtime => Some(Duration::from_secs_f64(config.env.control_interval())),
            Pacing::Fast => None,
        };
        Session {
            observation: config.env.observation,
            config,
            id: id.into(),
            phase: Phase::AwaitHello,
            env: None,
            out_seq: 0,
            in_seq: None,
            log: None,
            pacer: Pacer { interval, next: None },
            started: Instant::now(),
            frames_in: 0,
            errors_sent: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    fn next_seq(&mut self) -> u64 {
        self.out_seq += 1;
        self.out_seq
    }

    fn error(&mut self, ack: Option<u64>, message: impl Into<String>, fatal: bool) -> (ServerMessage, bool) {
        self.errors_sent += 1;
        (ServerMessage::Error { seq: self.next_seq(), ack, message: message.into(), fatal }, fatal)
    }

    fn session_dir(&self) -> Option<PathBuf> {
        self.config.log_dir.as_ref().map(|d| d.join(&self.id))
    }

    pub fn manifest(&self) -> RunManifest {
        let wall = self.started.elapsed().as_secs_f64();
        let mut m = match &self.env {
            Some(env) => env.manifest(wall),
            None => CylinderEnv::new(self.config.env.clone()).map(|e| e.manifest(wall)).unwrap_or_else(|_| RunManifest {
                version: env!("CARGO_PKG_VERSION").into(),
                config_hash: String::new(),
                seed: self.config.env.seed,
                latency: self.config.env.latency,
                reward_signal: String::new(),
                tau_nc: None,
                episodes: 0,
                agent_steps: 0,
                virtual_time_s: 0.0,
                wall_time_s: wall,
                clipped_actions: 0,
                pacing: None,
                stated_budget_steps: None,
            }),
        };
        m.pacing = Some(match self.config.pacing {
            Pacing::Realtime => "realtime".into(),
            Pacing::Fast => "fast".into(),
        });
        m.stated_budget_steps = Some(STATED_BUDGET_STEPS);
        m
    }

    fn write_manifest(&self) -> io::Result<()> {
        let Some(dir) = self.session_dir() else { return Ok(()) };
        let tmp = dir.join("manifest.json.tmp");
        serde_json::to_writer_pretty(File::create(&tmp)?, &self.manifest())?;
        std::fs::rename(tmp, dir.join("manifest.json"))
    }

    fn info(&self) -> SessionInfo {
        let cfg = &self.config.env;
        SessionInfo {
            session: self.id.clone(),
            episode_steps: cfg.episode_steps(),
            control_rate: cfg.control_rate,
            action_cap: cfg.action_cap,
            task: cfg.task,
            observation: self.observation,
            allowed: self.config.allowed.clone(),
            pacing: self.config.pacing,
        }
    }

    fn build_env(&mut self) -> Result<(), EnvError> {
        let cfg = EnvConfig { observation: self.observation, ..self.config.env.clone() };
        let mut env = CylinderEnv::new(cfg)?;
        env.set_source(self.id.clone());
        self.env = Some(env);
        Ok(())
    }

    fn resolve(&self, req: &ObservationRequest) -> Result<ObservationSet, String> {
        let allowed = &self.config.allowed;
        match req {
            ObservationRequest::Preset(name) => {
                let p: Preset = name.parse().map_err(|e: EnvError| e.to_string())?;
                if allowed.contains(&p) {
                    Ok(p.observation_set())
                } else {
                    Err(format!("observation preset {name:?} is not permitted by this server"))
                }
            }
            ObservationRequest::Set(set) => {
                if allowed.iter().any(|p| p.observation_set() == *set) {
                    Ok(*set)
                } else {
                    Err("observation set is not one of the permitted presets".into())
                }
            }
        }
    }

    /// Handles one frame. Returns the reply and whether to close afterwards.
    /// Blank lines get no reply.
    pub fn handle(&mut self, frame: &Frame) -> Option<(ServerMessage, bool)> {
        self.frames_in += 1;
        let bytes = match frame {
            Frame::TooLong(n) => return Some(self.error(None, format!("frame of {n} bytes exceeds {MAX_FRAME}"), false)),
            Frame::Line(b) => b,
        };
        let Ok(text) = std::str::from_utf8(bytes) else {
            return Some(self.error(None, "frame is not UTF-8", false));
        };
        if text.trim().is_empty() {
            return None;
        }
        let msg: ClientMessage = match serde_json::from_str(text) {
            Ok(m) => m,
            Err(e) => return Some(self.error(None, format!("malformed frame: {e}"), false)),
        };
        let seq = msg.seq();
        if let Some(last) = self.in_seq.filter(|last| seq <= *last) {
            return Some(self.error(Some(seq), format!("seq {seq} does not follow {last}"), false));
        }
        self.in_seq = Some(seq);
        Some(self.dispatch(msg))
    }

    fn dispatch(&mut self, msg: ClientMessage) -> (ServerMessage, bool) {
        let ack = msg.seq();
        match (self.phase, msg) {
            (Phase::AwaitHello, ClientMessage::Hello { version, .. }) => {
                if version != PROTOCOL_VERSION {
                    return self.error(Some(ack), format!("protocol version {version} unsupported, server speaks {PROTOCOL_VERSION}"), true);
                }
                if let Some(dir) = self.session_dir() {
                    if let Err(e) = std::fs::create_dir_all(&dir) {
                        return self.error(Some(ack), format!("cannot create log directory: {e}"), true);
                    }
                }
                if let Err(e) = self.build_env() {
                    return self.error(Some(ack), e.to_string(), true);
                }
                self.phase = Phase::Ready;
                (ServerMessage::Hello { seq: self.next_seq(), ack, version: PROTOCOL_VERSION, info: self.info() }, false)
            }
            (Phase::AwaitHello, _) => self.error(Some(ack), "hello required first", true),
            (_, ClientMessage::Hello { .. }) => self.error(Some(ack), "duplicate hello", true),
            (_, ClientMessage::Bye { .. }) => {
                self.close_log();
                let _ = self.write_manifest();
                (ServerMessage::Bye { seq: self.next_seq(), ack, manifest: self.manifest() }, true)
            }
            (Phase::Ready, ClientMessage::Config { observation, .. }) => {
                if self.env.as_ref().is_some_and(|e| e.episode_log().is_some() || e.lattice().is_some()) {
                    return self.error(Some(ack), "config is only accepted before the first reset", true);
                }
                match self.resolve(&observation) {
                    Ok(set) => {
                        self.observation = set;
                        if let Err(e) = self.build_env() {
                            return self.error(Some(ack), e.to_string(), true);
                        }
                        (ServerMessage::Config { seq: self.next_seq(), ack, observation: set }, false)
                    }
                    Err(e) => self.error(Some(ack), e, false),
                }
            }
            (_, ClientMessage::Config { .. }) => self.error(Some(ack), "config is only accepted before the first reset", true),
            (Phase::BudgetSpent, ClientMessage::Reset { .. }) => self.budget_spent(ack),
            (_, ClientMessage::Reset { .. }) => self.reset(ack),
            (Phase::InEpisode, ClientMessage::Act { action, .. }) => self.act(ack, action),
            (_, ClientMessage::Act { .. }) => self.error(Some(ack), "reset required", true),
        }
    }

    fn budget_spent(&mut self, ack: u64) -> (ServerMessage, bool) {
        let manifest = self.manifest();
        (ServerMessage::Done { seq: self.next_seq(), ack, reason: "episode budget exhausted".into(), manifest }, false)
    }

    fn reset(&mut self, ack: u64) -> (ServerMessage, bool) {
        self.close_log();
        let env = self.env.as_mut().expect("built at hello");
        if self.config.max_episodes.is_some_and(|m| env.manifest(0.0).episodes >= m) {
            self.phase = Phase::BudgetSpent;
            return self.budget_spent(ack);
        }
        let obs = match env.reset() {
            Ok(o) => o,
            Err(e) => {
                self.phase = Phase::Ready;
                return self.error(Some(ack), format!("{e}; reset to retry"), false);
            }
        };
        let header = env.episode_log().expect("episode started").header.clone();
        let episode = header.episode;
        if let Some(dir) = self.session_dir() {
            let opened = File::create(dir.join(format!("episode-{episode:04}.jsonl"))).map(BufWriter::new).and_then(|mut w| {
                write_line(&mut w, &LogLine::Header(header))?;
                Ok(w)
            });
            match opened {
                Ok(w) => self.log = Some(w),
                Err(e) => return self.error(Some(ack), format!("episode log: {e}"), true),
            }
        }
        self.phase = Phase::InEpisode;
        self.pacer.restart();
        (ServerMessage::Obs { seq: self.next_seq(), ack, episode, observation: WireObservation::from(&obs) }, false)
    }

    fn act(&mut self, ack: u64, action: f64) -> (ServerMessage, bool) {
        self.pacer.wait();
        let env = self.env.as_mut().expect("built at hello");
        let result = match env.step(action) {
            Ok(r) => r,
            Err(e) => {
                self.phase = Phase::Ready;
                self.close_log();
                return self.error(Some(ack), format!("{e}; reset required"), false);
            }
        };
        let record = *env.episode_log().and_then(|l| l.steps.last()).expect("step recorded");
        if let Some(w) = self.log.as_mut() {
            if let Err(e) = write_line(w, &LogLine::Step(record)) {
                return self.error(Some(ack), format!("episode log: {e}"), true);
            }
        }
        if result.done {
            self.phase = Phase::Ready;
            self.close_log();
            if let Err(e) = self.write_manifest() {
                return self.error(Some(ack), format!("manifest: {e}"), true);
            }
        }
        let msg = ServerMessage::Result {
            seq: self.next_seq(),
            ack,
            reward: result.reward,
            done: result.done,
            info: result.info,
            observation: WireObservation::from(&result.observation),
        };
        (msg, false)
    }

    fn close_log(&mut self) {
        if let Some(mut w) = self.log.take() {
            let _ = w.flush();
        }
    }

    /// Serves frames from `reader` until `bye`, a fatal error or end of
    /// stream. Every reply is flushed before the next frame is read.
    pub fn run(mut self, mut reader: impl BufRead, mut writer: impl Write) -> io::Result<SessionSummary> {
        let mut clean = false;
        loop {
            let frame = match read_frame(&mut reader, MAX_FRAME) {
                Ok(Some(f)) => f,
                Ok(None) => break,
                Err(e) if e.kind() == io::ErrorKind::InvalidData => Frame::TooLong(0),
                Err(_) => break,
            };
            let Some((reply, close)) = self.handle(&frame) else { continue };
            clean = matches!(reply, ServerMessage::Bye { .. });
            let mut line = serde_json::to_vec(&reply)?;
            line.push(b'\n');
            if writer.write_all(&line).and_then(|_| writer.flush()).is_err() {
                break;
            }
            if close {
                break;
            }
        }
        self.close_log();
        let _ = self.write_manifest();
        Ok(SessionSummary {
            id: self.id.clone(),
            manifest: self.manifest(),
            frames_in: self.frames_in,
            errors_sent: self.errors_sent,
            clean,
        })
    }
}
