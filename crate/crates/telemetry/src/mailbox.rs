use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use twinsim::dynamics::ActuatorCommand;
use twinsim::harness::{CommandSource, ControlInput, HarnessError};

use crate::protocol::ModeMsg;

/// A mode request queued by a session.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub session: u64,
    pub action: ModeMsg,
}

#[derive(Debug, Default)]
struct Slot {
    command: Option<ActuatorCommand>,
    heartbeat: Option<Instant>,
    requests: Vec<Request>,
}

/// Single-slot hand-off from the network side to the sim loop.
///
/// A newer command overwrites an older one that was never latched. The
/// sim reads the slot once per tick; without traffic from the controlling
/// client for `deadman`, the latched command is zero.
#[derive(Debug)]
pub struct Mailbox {
    slot: Mutex<Slot>,
    deadman: Duration,
}

impl Mailbox {
    pub fn new(deadman: Duration) -> Arc<Self> {
        Arc::new(Self {
            slot: Mutex::new(Slot::default()),
            deadman,
        })
    }

    fn slot(&self) -> std::sync::MutexGuard<'_, Slot> {
        self.slot.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn post(&self, command: ActuatorCommand, now: Instant) {
        let mut s = self.slot();
        s.command = Some(command);
        s.heartbeat = Some(now);
    }

    /// Records controller traffic without changing the command.
    pub fn heartbeat(&self, now: Instant) {
        self.slot().heartbeat = Some(now);
    }

    pub fn request(&self, session: u64, action: ModeMsg, now: Instant) {
        let mut s = self.slot();
        s.requests.push(Request { session, action });
        s.heartbeat = Some(now);
    }

    /// Drops the command, e.g. when control authority ends.
    pub fn release(&self) {
        let mut s = self.slot();
        s.command = None;
        s.heartbeat = None;
    }

    /// The command to apply on the tick being latched at `now`.
    pub fn latch(&self, now: Instant) -> ActuatorCommand {
        let mut s = self.slot();
        let alive = s.heartbeat.is_some_and(|h| now.saturating_duration_since(h) <= self.deadman);
        if !alive {
            s.command = None;
        }
        s.command.unwrap_or_default()
    }

    pub fn take_requests(&self) -> Vec<Request> {
        std::mem::take(&mut self.slot().requests)
    }
}

/// Command source reading the mailbox on every tick.
#[derive(Debug, Clone)]
pub struct MailboxSource(pub Arc<Mailbox>);

impl CommandSource for MailboxSource {
    fn command(&mut self, _: &ControlInput<'_>) -> Result<ActuatorCommand, HarnessError> {
        Ok(self.0.latch(Instant::now()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_mailbox_is_zero() {
        let m = Mailbox::new(Duration::from_millis(500));
        assert_eq!(m.latch(Instant::now()), ActuatorCommand::default());
    }

    #[test]
    fn latest_command_wins() {
        let m = Mailbox::new(Duration::from_millis(500));
        let t = Instant::now();
        for k in 1..=3 {
            m.post(ActuatorCommand::new(0.1 * k as f64, 0.0), t);
        }
        assert_eq!(m.latch(t).throttle, 0.1 * 3.0);
        // held until replaced
        assert_eq!(m.latch(t + Duration::from_millis(100)).throttle, 0.1 * 3.0);
    }

    #[test]
    fn deadman_zeroes_after_silence() {
        let m = Mailbox::new(Duration::from_millis(500));
        let t = Instant::now();
        m.post(ActuatorCommand::new(0.5, 0.2), t);
        assert_eq!(m.latch(t + Duration::from_millis(500)).throttle, 0.5);
        assert_eq!(m.latch(t + Duration::from_millis(501)), ActuatorCommand::default());
        // a late heartbeat does not resurrect the dropped command
        m.heartbeat(t + Duration::from_millis(600));
        assert_eq!(m.latch(t + Duration::from_millis(600)), ActuatorCommand::default());
    }

    #[test]
    fn heartbeat_keeps_command_alive() {
        let m = Mailbox::new(Duration::from_millis(500));
        let t = Instant::now();
        m.post(ActuatorCommand::new(0.5, 0.0), t);
        m.heartbeat(t + Duration::from_millis(400));
        assert_eq!(m.latch(t + Duration::from_millis(800)).throttle, 0.5);
    }

    #[test]
    fn requests_drain_in_order() {
        let m = Mailbox::new(Duration::from_millis(500));
        let t = Instant::now();
        m.request(1, ModeMsg::StartMapping, t);
        m.request(1, ModeMsg::StartRecording, t);
        let r = m.take_requests();
        assert_eq!(r.iter().map(|r| r.action.name()).collect::<Vec<_>>(), ["start_mapping", "start_recording"]);
        assert!(m.take_requests().is_empty());
    }
}
