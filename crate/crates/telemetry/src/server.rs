use std::collections::VecDeque;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio::sync::watch;
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::Message;

use twinsim::environment::Cell;
use twinsim::harness::{
    run_scenario_with, Directive, DriverConfig, HarnessError, RunHooks, RunMetrics, RunObserver, RunOutput, ScenarioConfig, TickView,
};
use twinsim::sensors::LidarParams;

use crate::mailbox::{Mailbox, MailboxSource, Request};
use crate::protocol::{
    codes, decode, encode_map_binary, encode_scan_binary, encode_state_frame, Ack, DecodeError, Envelope, ErrorMsg, MapMeta, ModeMsg,
    Role, StateExtras, StateFrame, WireMessage, MAP_FREE, MAP_OCCUPIED, MAP_UNKNOWN,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerConfig {
    /// State frames per second sent to each client.
    pub state_rate: f64,
    /// Scan frames per second sent to each client.
    pub scan_rate: f64,
    /// Map frames per second while mapping.
    pub map_rate: f64,
    /// Silence after which control authority lapses.
    pub deadman: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            state_rate: 50.0,
            scan_rate: 10.0,
            map_rate: 1.0,
            deadman: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanData {
    pub tick: u64,
    pub binary: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct MapData {
    pub tick: u64,
    pub meta: MapMeta,
    pub binary: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Event {
    pub seq: u64,
    pub message: Envelope,
}

/// Immutable view of the sim published once per tick.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub tick: u64,
    pub state: StateFrame,
    pub waypoints: Arc<Vec<[f64; 3]>>,
    pub scan: Option<Arc<ScanData>>,
    pub map: Option<Arc<MapData>>,
    /// Recent acks and errors for mode requests, oldest first.
    pub events: Arc<Vec<Event>>,
    pub finished: Option<RunMetrics>,
}

const EVENT_HISTORY: usize = 64;

/// Sim-side half: publishes snapshots and turns queued mode requests into
/// run directives.
struct Publisher {
    tx: watch::Sender<Option<Arc<Snapshot>>>,
    mailbox: Arc<Mailbox>,
    lidar: Option<LidarParams>,
    map_period: u64,
    waypoints: Arc<Vec<[f64; 3]>>,
    scan: Option<Arc<ScanData>>,
    map: Option<Arc<MapData>>,
    events: VecDeque<Event>,
    events_view: Arc<Vec<Event>>,
    seq: u64,
    pending: VecDeque<Request>,
    last: Option<Arc<Snapshot>>,
}

impl Publisher {
    fn push_event(&mut self, tick: u64, body: WireMessage) {
        self.seq += 1;
        self.events.push_back(Event {
            seq: self.seq,
            message: Envelope::new(tick, body),
        });
        while self.events.len() > EVENT_HISTORY {
            self.events.pop_front();
        }
        self.events_view = Arc::new(self.events.iter().cloned().collect());
    }

    fn current_tick(&self) -> u64 {
        self.last.as_ref().map_or(0, |s| s.tick)
    }
}

fn map_cells(view: &TickView<'_>) -> (MapMeta, Vec<u8>) {
    let grid = view.map.to_grid(twinsim::environment::DEFAULT_OCCUPIED_THRESH, twinsim::environment::DEFAULT_FREE_THRESH);
    let mut cells = Vec::with_capacity(grid.width * grid.height);
    for cy in 0..grid.height as i64 {
        for cx in 0..grid.width as i64 {
            cells.push(match grid.get(cx, cy) {
                Some(Cell::Free) => MAP_FREE,
                Some(Cell::Occupied) => MAP_OCCUPIED,
                _ => MAP_UNKNOWN,
            });
        }
    }
    let meta = MapMeta {
        width: grid.width,
        height: grid.height,
        resolution: grid.resolution,
        origin: [grid.origin.x, grid.origin.y],
        path: None,
    };
    (meta, cells)
}

impl RunObserver for Publisher {
    fn on_tick(&mut self, view: &TickView<'_>) -> Vec<Directive> {
        let tick = view.state.tick;
        if view.waypoints.len() != self.waypoints.len() {
            self.waypoints = Arc::new(view.waypoints.iter().map(|w| [w.x, w.y, w.v]).collect());
        }
        if let (Some(ranges), Some(l)) = (&view.frame.scan, &self.lidar) {
            self.scan = Some(Arc::new(ScanData {
                tick: view.frame.tick,
                binary: encode_scan_binary(view.frame.tick, ranges, l.theta_min, l.theta_res, l.r_max),
            }));
        }
        if view.mapping && tick % self.map_period == 0 {
            let (meta, cells) = map_cells(view);
            self.map = Some(Arc::new(MapData {
                tick,
                binary: encode_map_binary(tick, meta.width, meta.height, meta.resolution, meta.origin, &cells),
                meta,
            }));
        }
        let state = encode_state_frame(
            view.state,
            &StateExtras {
                command: *view.command,
                odometry: view.estimate.pose,
                mapping: view.mapping,
                recording: view.recording,
                tracking: view.tracking,
                completion: view.completion,
                waypoint_count: view.waypoints.len(),
            },
        );
        let snap = Arc::new(Snapshot {
            tick,
            state,
            waypoints: self.waypoints.clone(),
            scan: self.scan.clone(),
            map: self.map.clone(),
            events: self.events_view.clone(),
            finished: None,
        });
        self.last = Some(snap.clone());
        self.tx.send_replace(Some(snap));

        let mut directives = Vec::new();
        for r in self.mailbox.take_requests() {
            directives.push(match &r.action {
                ModeMsg::StartMapping => Directive::SetMapping(true),
                ModeMsg::StopMapping => Directive::SetMapping(false),
                ModeMsg::StartRecording => Directive::SetRecording(true),
                ModeMsg::StopRecording => Directive::SetRecording(false),
                ModeMsg::SaveMap { path } => Directive::SaveMap(PathBuf::from(path)),
                ModeMsg::SaveTrajectory { path } => Directive::SaveTrajectory(PathBuf::from(path)),
                ModeMsg::EngageTracking => Directive::EngageTracking,
                ModeMsg::Stop => Directive::Stop,
            });
            self.pending.push_back(r);
        }
        directives
    }

    fn on_directive(&mut self, _directive: &Directive, result: Result<String, &HarnessError>) {
        let Some(req) = self.pending.pop_front() else {
            return;
        };
        let tick = self.current_tick();
        match result {
            Ok(message) => {
                if let ModeMsg::SaveMap { path } = &req.action {
                    if let Some(m) = &self.map {
                        let mut meta = m.meta.clone();
                        meta.path = Some(path.clone());
                        self.push_event(tick, WireMessage::MapMeta(meta));
                    }
                }
                self.push_event(
                    tick,
                    WireMessage::Ack(Ack {
                        session: req.session,
                        action: req.action.name().into(),
                        message,
                    }),
                );
            }
            Err(e) => self.push_event(
                tick,
                WireMessage::Error(ErrorMsg {
                    code: codes::ACTION_FAILED.into(),
                    message: format!("{}: {e}", req.action.name()),
                    session: Some(req.session),
                }),
            ),
        }
    }

    fn on_finish(&mut self, metrics: &RunMetrics) {
        if let Some(last) = &self.last {
            let mut snap = (**last).clone();
            snap.events = self.events_view.clone();
            snap.finished = Some(metrics.clone());
            self.tx.send_replace(Some(Arc::new(snap)));
        } else {
            // zero-tick run: nothing to stream, but clients must learn it ended
            self.tx.send_replace(None);
        }
    }
}

/// Network-side state shared by the connection tasks.
struct Hub {
    mailbox: Arc<Mailbox>,
    snapshots: watch::Receiver<Option<Arc<Snapshot>>>,
    config: ServerConfig,
    /// Session holding control and the time of its last message.
    authority: Mutex<Option<(u64, Instant)>>,
    next_session: AtomicU64,
    done: watch::Receiver<bool>,
}

impl Hub {
    fn authority(&self) -> std::sync::MutexGuard<'_, Option<(u64, Instant)>> {
        self.authority.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Claims control for `id`, or names the live holder.
    fn claim(&self, id: u64, now: Instant) -> Result<(), u64> {
        let mut a = self.authority();
        match *a {
            Some((holder, seen)) if holder != id && now.saturating_duration_since(seen) <= self.config.deadman => Err(holder),
            Some((holder, _)) if holder == id => Ok(()),
            _ => {
                *a = Some((id, now));
                self.mailbox.release();
                Ok(())
            }
        }
    }

    fn holds(&self, id: u64) -> bool {
        matches!(*self.authority(), Some((h, _)) if h == id)
    }

    fn touch(&self, id: u64, now: Instant) -> bool {
        let mut a = self.authority();
        match a.as_mut() {
            Some((h, seen)) if *h == id => {
                *seen = now;
                self.mailbox.heartbeat(now);
                true
            }
            _ => false,
        }
    }

    fn release(&self, id: u64) {
        let mut a = self.authority();
        if matches!(*a, Some((h, _)) if h == id) {
            *a = None;
            self.mailbox.release();
        }
    }
}

/// A bound telemetry endpoint that runs one scenario while serving it.
pub struct TelemetryServer {
    listener: std::net::TcpListener,
    config: ServerConfig,
}

impl TelemetryServer {
    pub fn bind(addr: SocketAddr, config: ServerConfig) -> std::io::Result<Self> {
        let listener = std::net::TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(Self { listener, config })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Runs the scenario on the calling thread while clients are served
    /// on a background runtime. Client commands drive the vehicle when the
    /// scenario uses the external driver.
    pub fn run(self, scenario: &ScenarioConfig) -> Result<RunOutput, HarnessError> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .map_err(|e| HarnessError::Config(format!("telemetry runtime: {e}")))?;
        let mailbox = Mailbox::new(self.config.deadman);
        let (tx, rx) = watch::channel(None);
        let (done_tx, done_rx) = watch::channel(false);
        let hub = Arc::new(Hub {
            mailbox: mailbox.clone(),
            snapshots: rx,
            config: self.config,
            authority: Mutex::new(None),
            next_session: AtomicU64::new(1),
            done: done_rx,
        });
        let listener = {
            let _guard = runtime.enter();
            tokio::net::TcpListener::from_std(self.listener).map_err(|e| HarnessError::Config(format!("telemetry listener: {e}")))?
        };
        let accept_hub = hub.clone();
        runtime.spawn(async move {
            loop {
                match listener.accept().await {
                    Ok((stream, peer)) => {
                        let id = accept_hub.next_session.fetch_add(1, Ordering::Relaxed);
                        log::info!("session {id} from {peer}");
                        tokio::spawn(session(accept_hub.clone(), stream, id));
                    }
                    Err(e) => log::warn!("accept failed: {e}"),
                }
            }
        });

        let map_period = (1.0 / (self.config.map_rate.max(1e-3) * twinsim::PHYSICS_DT)).round().max(1.0) as u64;
        let mut publisher = Publisher {
            tx,
            mailbox: mailbox.clone(),
            lidar: scenario.sensors.lidar.clone(),
            map_period,
            waypoints: Arc::new(Vec::new()),
            scan: None,
            map: None,
            events: VecDeque::new(),
            events_view: Arc::new(Vec::new()),
            seq: 0,
            pending: VecDeque::new(),
            last: None,
        };
        let source: Option<Box<dyn twinsim::harness::CommandSource>> = match scenario.driver {
            DriverConfig::External => Some(Box::new(MailboxSource(mailbox))),
            _ => None,
        };
        let result = run_scenario_with(
            scenario,
            RunHooks {
                source,
                observer: Some(&mut publisher),
            },
        );
        let _ = done_tx.send(true);
        // let sessions flush the final frames before the runtime stops
        runtime.block_on(async {
            let deadline = tokio::time::Instant::now() + Duration::from_millis(500);
            while Arc::strong_count(&hub) > 2 && tokio::time::Instant::now() < deadline {
                tokio::time::sleep(Duration::from_millis(10)).await;
            }
        });
        runtime.shutdown_timeout(Duration::from_millis(100));
        result
    }
}

fn period(rate: f64) -> Duration {
    Duration::from_secs_f64(1.0 / rate.max(1e-3))
}

struct Conn {
    id: u64,
    role: Option<Role>,
    authority: bool,
    sent_waypoints: usize,
    last_state: Option<u64>,
    last_scan: Option<u64>,
    last_map: Option<u64>,
    last_event: u64,
    last_traffic: Instant,
}

enum Outcome {
    Continue,
    Close,
}

impl Conn {
    fn reply(&self, tick: u64, body: WireMessage) -> Message {
        Message::Text(Envelope::new(tick, body).to_text())
    }

    fn error(&self, tick: u64, code: &str, message: impl Into<String>) -> Message {
        self.reply(
            tick,
            WireMessage::Error(ErrorMsg {
                code: code.into(),
                message: message.into(),
                session: Some(self.id),
            }),
        )
    }

    fn handle_text(&mut self, hub: &Hub, text: &str, out: &mut Vec<Message>) -> Outcome {
        let now = Instant::now();
        self.last_traffic = now;
        let tick = hub.snapshots.borrow().as_ref().map_or(0, |s| s.tick);
        if self.authority && !hub.touch(self.id, now) {
            self.authority = false;
        }
        let env = match decode(text) {
            Ok(env) => env,
            Err(e @ (DecodeError::Version { .. } | DecodeError::MissingVersion)) if self.role.is_none() => {
                out.push(self.reply(
                    tick,
                    WireMessage::Refuse {
                        reason: e.to_string(),
                        holder: None,
                    },
                ));
                return Outcome::Close;
            }
            Err(e) => {
                out.push(self.error(tick, e.code(), e.to_string()));
                return Outcome::Continue;
            }
        };
        match env.body {
            WireMessage::Hello { role } => {
                if role == Role::Driver {
                    if let Err(holder) = hub.claim(self.id, now) {
                        out.push(self.reply(
                            tick,
                            WireMessage::Refuse {
                                reason: format!("control held by session {holder}"),
                                holder: Some(holder),
                            },
                        ));
                        return Outcome::Continue;
                    }
                    self.authority = true;
                } else if self.authority {
                    hub.release(self.id);
                    self.authority = false;
                }
                if self.role.is_none() {
                    self.last_event = hub.snapshots.borrow().as_ref().and_then(|s| s.events.last().map(|e| e.seq)).unwrap_or(0);
                }
                self.role = Some(role);
                out.push(self.reply(tick, WireMessage::Accept { session: self.id, role }));
            }
            WireMessage::Command(c) => match self.role {
                None => out.push(self.error(tick, codes::HANDSHAKE_REQUIRED, "send hello first")),
                Some(_) if !self.authority => out.push(self.error(tick, codes::NO_AUTHORITY, "this session does not hold control")),
                Some(_) => hub.mailbox.post(c.into(), now),
            },
            WireMessage::Mode(m) => match self.role {
                None => out.push(self.error(tick, codes::HANDSHAKE_REQUIRED, "send hello first")),
                Some(_) if !self.authority => out.push(self.error(tick, codes::NO_AUTHORITY, "this session does not hold control")),
                Some(_) => hub.mailbox.request(self.id, m, now),
            },
            other => {
                let kind = serde_json::to_value(&other)
                    .ok()
                    .and_then(|v| v.get("type").and_then(|t| t.as_str()).map(String::from))
                    .unwrap_or_default();
                out.push(self.error(tick, codes::NOT_CLIENT_MESSAGE, format!("`{kind}` is sent by the server only")));
            }
        }
        Outcome::Continue
    }

    /// State, waypoint delta and new events.
    fn stream_state(&mut self, snap: &Snapshot, out: &mut Vec<Message>) {
        let since = self.last_event;
        for e in snap.events.iter().filter(|e| e.seq > since) {
            out.push(Message::Text(e.message.to_text()));
            self.last_event = e.seq;
        }
        if self.last_state == Some(snap.tick) && snap.finished.is_none() {
            return;
        }
        let mut frame = snap.state.clone();
        if snap.waypoints.len() < self.sent_waypoints {
            self.sent_waypoints = 0;
        }
        frame.waypoint_offset = self.sent_waypoints;
        frame.new_waypoints = snap.waypoints[self.sent_waypoints..].to_vec();
        self.sent_waypoints = snap.waypoints.len();
        self.last_state = Some(snap.tick);
        out.push(self.reply(snap.tick, WireMessage::State(frame)));
    }
}

async fn session(hub: Arc<Hub>, stream: TcpStream, id: u64) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            log::debug!("session {id}: handshake failed: {e}");
            return;
        }
    };
    let (mut sink, mut stream) = ws.split();
    let mut conn = Conn {
        id,
        role: None,
        authority: false,
        sent_waypoints: 0,
        last_state: None,
        last_scan: None,
        last_map: None,
        last_event: 0,
        last_traffic: Instant::now(),
    };
    let mut state_iv = tokio::time::interval(period(hub.config.state_rate));
    let mut scan_iv = tokio::time::interval(period(hub.config.scan_rate));
    let mut map_iv = tokio::time::interval(period(hub.config.map_rate));
    for iv in [&mut state_iv, &mut scan_iv, &mut map_iv] {
        iv.set_missed_tick_behavior(MissedTickBehavior::Skip);
    }
    let mut done = hub.done.clone();

    loop {
        let mut out = Vec::new();
        let mut close = false;
        tokio::select! {
            msg = stream.next() => match msg {
                Some(Ok(Message::Text(t))) => {
                    if let Outcome::Close = conn.handle_text(&hub, &t, &mut out) {
                        close = true;
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    let tick = hub.snapshots.borrow().as_ref().map_or(0, |s| s.tick);
                    out.push(conn.error(tick, codes::MALFORMED, "clients send text frames only"));
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {
                    // ping and pong count as traffic
                    conn.last_traffic = Instant::now();
                    if conn.authority {
                        hub.touch(conn.id, conn.last_traffic);
                    }
                }
            },
            _ = state_iv.tick() => {
                if conn.authority && conn.last_traffic.elapsed() > hub.config.deadman {
                    hub.release(conn.id);
                    conn.authority = false;
                    let tick = hub.snapshots.borrow().as_ref().map_or(0, |s| s.tick);
                    out.push(conn.error(tick, codes::AUTHORITY_LAPSED, "no traffic for the dead-man interval; command zeroed"));
                } else if conn.authority && !hub.holds(conn.id) {
                    conn.authority = false;
                    out.push(conn.error(0, codes::AUTHORITY_LAPSED, "control was taken over"));
                }
                if conn.role.is_some() {
                    let snap = hub.snapshots.borrow().clone();
                    if let Some(s) = snap {
                        conn.stream_state(&s, &mut out);
                        if s.finished.is_some() {
                            close = true;
                        }
                    } else if *hub.done.borrow() {
                        close = true;
                    }
                }
            },
            _ = scan_iv.tick() => {
                if conn.role.is_some() {
                    let scan = hub.snapshots.borrow().as_ref().and_then(|s| s.scan.clone());
                    if let Some(scan) = scan.filter(|s| conn.last_scan != Some(s.tick)) {
                        conn.last_scan = Some(scan.tick);
                        out.push(Message::Binary(scan.binary.clone()));
                    }
                }
            },
            _ = map_iv.tick() => {
                if conn.role.is_some() {
                    let map = hub.snapshots.borrow().as_ref().and_then(|s| s.map.clone());
                    if let Some(map) = map.filter(|m| conn.last_map != Some(m.tick)) {
                        conn.last_map = Some(map.tick);
                        out.push(conn.reply(map.tick, WireMessage::MapMeta(map.meta.clone())));
                        out.push(Message::Binary(map.binary.clone()));
                    }
                }
            },
            _ = done.changed() => {
                if conn.role.is_some() {
                    let snap = hub.snapshots.borrow().clone();
                    if let Some(s) = snap {
                        conn.stream_state(&s, &mut out);
                    }
                }
                close = true;
            },
        }
        for m in out {
            if sink.send(m).await.is_err() {
                close = true;
                break;
            }
        }
        if close {
            let _ = sink.send(Message::Close(None)).await;
            break;
        }
    }
    if conn.authority {
        hub.release(conn.id);
    }
    log::info!("session {id} closed");
}
