use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{parse_topic, Channel, TelemetryError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub topic: String,
    pub payload: String,
}

/// Publisher side of the pub/sub transport.
pub trait Transport: Send {
    fn publish(&mut self, topic: &str, payload: &str) -> Result<(), TelemetryError>;
    fn stats(&self) -> TransportStats;
}

/// Subscriber side: every message whose topic matches one of `filters` is
/// delivered on the returned channel, in publish order per publisher.
pub trait Subscribe {
    fn subscribe(&self, filters: &[&str]) -> Result<Receiver<Message>, TelemetryError>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransportStats {
    pub published: u64,
    pub dropped: u64,
    pub duplicated: u64,
    pub failed: u64,
}

/// MQTT-style filter matching with `+` (one level) and `#` (rest).
pub fn topic_matches(filter: &str, topic: &str) -> bool {
    let mut f = filter.split('/');
    let mut t = topic.split('/');
    loop {
        match (f.next(), t.next()) {
            (Some("#"), _) => return true,
            (Some("+"), Some(_)) => {}
            (Some(a), Some(b)) if a == b => {}
            (None, None) => return true,
            _ => return false,
        }
    }
}

struct Subscriber {
    filters: Vec<String>,
    tx: Sender<Message>,
}

/// In-process broker shared by any number of publishers and subscribers.
#[derive(Clone, Default)]
pub struct LoopbackBroker {
    subs: Arc<Mutex<Vec<Subscriber>>>,
}

impl LoopbackBroker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Routes synchronously under the broker lock, so two messages from the
    /// same publisher can never overtake each other.
    pub fn route(&self, msg: &Message) {
        let mut subs = self.subs.lock().expect("broker lock");
        subs.retain(|s| {
            if s.filters.iter().any(|f| topic_matches(f, &msg.topic)) {
                s.tx.send(msg.clone()).is_ok()
            } else {
                true
            }
        });
    }

    pub fn transport(&self, faults: FaultConfig) -> LoopbackTransport {
        LoopbackTransport::new(self.clone(), faults)
    }
}

impl Subscribe for LoopbackBroker {
    fn subscribe(&self, filters: &[&str]) -> Result<Receiver<Message>, TelemetryError> {
        let (tx, rx) = channel();
        self.subs
            .lock()
            .expect("broker lock")
            .push(Subscriber { filters: filters.iter().map(|f| f.to_string()).collect(), tx });
        Ok(rx)
    }
}

/// Injected faults for the data channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultConfig {
    pub loss_rate: f64,
    pub duplicate_rate: f64,
    pub seed: u64,
}

impl Default for FaultConfig {
    fn default() -> Self {
        Self { loss_rate: 0.0, duplicate_rate: 0.0, seed: 0 }
    }
}

impl FaultConfig {
    pub fn lossless() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), TelemetryError> {
        for (name, r) in [("loss_rate", self.loss_rate), ("duplicate_rate", self.duplicate_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(TelemetryError::Transport(format!("{name} must be in [0, 1], got {r}")));
            }
        }
        Ok(())
    }
}

/// One publisher's connection to a [`LoopbackBroker`].
///
/// Loss and duplication apply to data topics only; info records always get
/// through (retried until acknowledged). While the outage flag is set every
/// publish fails with [`TelemetryError::Down`].
pub struct LoopbackTransport {
    broker: LoopbackBroker,
    faults: FaultConfig,
    rng: ChaCha8Rng,
    down: Arc<AtomicBool>,
    stats: TransportStats,
}

impl LoopbackTransport {
    pub fn new(broker: LoopbackBroker, faults: FaultConfig) -> Self {
        Self {
            broker,
            faults,
            rng: ChaCha8Rng::seed_from_u64(faults.seed),
            down: Arc::new(AtomicBool::new(false)),
            stats: TransportStats::default(),
        }
    }

    /// Shared switch for simulating a link outage.
    pub fn outage_switch(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.down)
    }

    pub fn set_down(&self, down: bool) {
        self.down.store(down, Ordering::SeqCst);
    }
}

impl Transport for LoopbackTransport {
    fn publish(&mut self, topic: &str, payload: &str) -> Result<(), TelemetryError> {
        if self.down.load(Ordering::SeqCst) {
            self.stats.failed += 1;
            return Err(TelemetryError::Down);
        }
        let msg = Message { topic: topic.to_string(), payload: payload.to_string() };
        self.stats.published += 1;
        let is_data = matches!(parse_topic(topic), Some((_, Channel::Data)));
        if is_data {
            // Draw both every time so the fault pattern depends only on the seed
            // and message index.
            let lost = self.rng.gen::<f64>() < self.faults.loss_rate;
            let dup = self.rng.gen::<f64>() < self.faults.duplicate_rate;
            if lost {
                self.stats.dropped += 1;
                return Ok(());
            }
            self.broker.route(&msg);
            if dup {
                self.stats.duplicated += 1;
                self.broker.route(&msg);
            }
        } else {
            self.broker.route(&msg);
        }
        Ok(())
    }

    fn stats(&self) -> TransportStats {
        self.stats
    }
}
