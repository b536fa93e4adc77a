//! Event-sourced achievement engine: folds developer events into progress,
//! levels and notifications, and persists the result.

mod log;
mod notify;
mod state;
mod store;
mod view;

pub use log::{read_log, EventLog, LogEntry, LogError};
pub use notify::{Notification, NotificationKind};
pub use state::{
    replay, replay_entries, EngineConfig, EngineError, EngineState, Replay, DEFAULT_IDLE_MS, EXPERIMENT_IDLE_MS,
};
pub use store::{
    import, load_state, read_store_log, recover, save_state, Checkpoint, Recovery, Store, StoreError, StoreOptions,
    STATE_VERSION,
};
pub use view::{AchievementView, StateView};
