use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{lookup, AchievementId, Level};
use crate::events::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub ts: Timestamp,
    #[serde(flatten)]
    pub kind: NotificationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NotificationKind {
    /// `progress` is the value that reached the level (the level's own
    /// counter for multi-parameter achievements).
    LevelUp {
        achievement: AchievementId,
        level: Level,
        progress: u64,
    },
    /// `quartile` is 1, 2 or 3; `fraction` is `quartile / 4`.
    Progress {
        achievement: AchievementId,
        next_level: Level,
        quartile: u8,
        fraction: f64,
        progress: u64,
    },
    Encouragement {
        achievement: AchievementId,
        text: String,
    },
}

impl NotificationKind {
    pub fn achievement(&self) -> AchievementId {
        match self {
            NotificationKind::LevelUp { achievement, .. }
            | NotificationKind::Progress { achievement, .. }
            | NotificationKind::Encouragement { achievement, .. } => *achievement,
        }
    }
}

/// One-line terminal form, e.g. `[LEVEL-UP] The Tester → Silver (100 runs)`.
impl fmt::Display for Notification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            NotificationKind::LevelUp { achievement, level, progress } => {
                let def = lookup(*achievement);
                write!(f, "[LEVEL-UP] {} → {} ({} {})", def.title, level, progress, def.unit)
            }
            NotificationKind::Progress { achievement, next_level, quartile, progress, .. } => {
                let def = lookup(*achievement);
                write!(
                    f,
                    "[PROGRESS] {} {}% of the way to {} ({} {})",
                    def.title,
                    u32::from(*quartile) * 25,
                    next_level,
                    progress,
                    def.unit
                )
            }
            NotificationKind::Encouragement { achievement, text } => {
                write!(f, "[ENCOURAGE] {} ({})", text, lookup(*achievement).title)
            }
        }
    }
}
