//! The single consumer. The watcher, the HTTP API and the idle timer all
//! send [`Command`]s into one channel; this loop applies them to the store
//! in arrival order, prints notifications and republishes them on `/live`.

use std::io::Write;
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;

use crossbeam_channel::Receiver;
use questd_core::engine::{EngineError, Notification, StateView, Store, StoreError};
use questd_core::events::{DevEvent, Timestamp};
use serde_json::json;
use tokio::sync::{broadcast, oneshot};

pub type Reply<T> = oneshot::Sender<T>;

pub enum Command {
    Event { event: DevEvent, reply: Option<Reply<Result<Vec<Notification>, Rejected>>> },
    Tick(Timestamp),
    Reset { reply: Reply<Result<(), String>> },
    Shutdown,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Rejected {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    OutOfOrder(String),
    #[error("{0}")]
    Failed(String),
}

impl From<StoreError> for Rejected {
    fn from(e: StoreError) -> Rejected {
        match e {
            StoreError::Engine(EngineError::OutOfOrderEvent { .. }) => Rejected::OutOfOrder(e.to_string()),
            StoreError::Engine(EngineError::InvalidEvent(_)) => Rejected::Invalid(e.to_string()),
            e => Rejected::Failed(e.to_string()),
        }
    }
}

pub fn now_ms() -> Timestamp {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis() as Timestamp)
}

/// Serialized form shared by `GET /state` and `questd status --json`.
pub fn state_json(view: &StateView) -> String {
    let mut out = serde_json::to_string_pretty(view).expect("state view serializes");
    out.push('\n');
    out
}

struct Snapshot {
    json: Arc<str>,
    digest: String,
}

/// What request handlers may read: the latest state and the live feed.
pub struct Shared {
    snapshot: RwLock<Snapshot>,
    live: broadcast::Sender<Arc<str>>,
}

impl Shared {
    pub fn new(view: &StateView) -> Arc<Shared> {
        let (live, _) = broadcast::channel(4096);
        Arc::new(Shared {
            snapshot: RwLock::new(Snapshot { json: state_json(view).into(), digest: view.digest.clone() }),
            live,
        })
    }

    pub fn state_json(&self) -> Arc<str> {
        self.snapshot.read().expect("snapshot lock").json.clone()
    }

    pub fn digest(&self) -> String {
        self.snapshot.read().expect("snapshot lock").digest.clone()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<str>> {
        self.live.subscribe()
    }

    fn send(&self, msg: serde_json::Value) {
        // No subscribers is not an error.
        let _ = self.live.send(msg.to_string().into());
    }
}

pub fn spawn_consumer(store: Store, shared: Arc<Shared>, rx: Receiver<Command>) -> JoinHandle<Result<(), StoreError>> {
    std::thread::Builder::new()
        .name("questd-engine".into())
        .spawn(move || Consumer { prev: StateView::new(store.state()), store, shared }.run(rx))
        .expect("spawn engine thread")
}

struct Consumer {
    store: Store,
    shared: Arc<Shared>,
    prev: StateView,
}

impl Consumer {
    fn run(mut self, rx: Receiver<Command>) -> Result<(), StoreError> {
        while let Ok(cmd) = rx.recv() {
            match cmd {
                Command::Event { event, reply } => {
                    let result = self.store.submit(event).map_err(Rejected::from);
                    match &result {
                        Ok(notes) => self.emit(notes),
                        Err(e) if reply.is_none() => eprintln!("questd: event rejected: {e}"),
                        Err(_) => {}
                    }
                    self.publish();
                    if let Some(reply) = reply {
                        let _ = reply.send(result);
                    }
                }
                Command::Tick(now) => {
                    let now = now.max(self.store.state().last_event_ts.unwrap_or(Timestamp::MIN));
                    match self.store.tick(now) {
                        Ok(Some(n)) => {
                            self.emit(std::slice::from_ref(&n));
                            self.publish();
                        }
                        Ok(None) => {}
                        Err(e) => eprintln!("questd: idle tick failed: {e}"),
                    }
                }
                Command::Reset { reply } => {
                    let ts = now_ms().max(self.store.state().last_event_ts.unwrap_or(Timestamp::MIN));
                    let result = self.store.reset(true, ts).map_err(|e| e.to_string());
                    if result.is_ok() {
                        println!("[RESET] all progress cleared");
                        self.shared.send(json!({"type": "reset", "ts": ts}));
                        self.publish();
                    }
                    let _ = reply.send(result);
                }
                Command::Shutdown => break,
            }
        }
        self.store.close()
    }

    /// Terminal first, then `/live`, one notification at a time, so both
    /// see the same order.
    fn emit(&self, notes: &[Notification]) {
        let mut out = std::io::stdout().lock();
        for n in notes {
            let _ = writeln!(out, "{n}");
            let _ = out.flush();
            self.shared.send(json!({"type": "notification", "notification": n}));
        }
    }

    fn publish(&mut self) {
        let view = StateView::new(self.store.state());
        if view == self.prev {
            return;
        }
        let changed: Vec<_> =
            view.achievements.iter().zip(&self.prev.achievements).filter(|(a, b)| a != b).map(|(a, _)| a).collect();
        self.shared.send(json!({
            "type": "state",
            "digest": view.digest,
            "last_event_ts": view.last_event_ts,
            "changed": changed,
        }));
        *self.shared.snapshot.write().expect("snapshot lock") =
            Snapshot { json: state_json(&view).into(), digest: view.digest.clone() };
        self.prev = view;
    }
}
