//! The fixed set of 27 testing achievements and the rules that map a
//! progress value onto a level.
//!
//! Boundaries are either a plain count per level or, for the multi-parameter
//! achievements, an `(X, Y[, Z])` tuple per level. Multi-parameter
//! achievements keep one counter per level; an observation increments every
//! level whose `Y`/`Z` thresholds it meets and level `L` is reached once
//! `counter[L] >= X[L]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! achievement_ids {
    ($($variant:ident => $slug:literal),* $(,)?) => {
        /// Stable identifier of one achievement.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum AchievementId {
            $(#[serde(rename = $slug)] $variant,)*
        }

        impl AchievementId {
            pub const ALL: [AchievementId; 27] = [$(AchievementId::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(AchievementId::$variant => $slug,)*
                }
            }
        }

        impl FromStr for AchievementId {
            type Err = UnknownAchievement;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($slug => Ok(AchievementId::$variant),)*
                    other => Err(UnknownAchievement(other.to_string())),
                }
            }
        }
    };
}

// Variant order is table order; `ALL` and `catalog()` rely on it.
achievement_ids! {
    TestExecutor => "test-executor",
    TheTester => "the-tester",
    TheTesterAdvanced => "the-tester-advanced",
    AssertAndTested => "assert-and-tested",
    BugFinder => "bug-finder",
    TestFixer => "test-fixer",
    SafetyFirst => "safety-first",
    GottaCatchEmAll => "gotta-catch-em-all",
    LineByLine => "line-by-line",
    CheckYourMethods => "check-your-methods",
    CheckYourClasses => "check-your-classes",
    CheckYourBranches => "check-your-branches",
    ClassReviewerLines => "class-reviewer-lines",
    ClassReviewerMethods => "class-reviewer-methods",
    ClassReviewerBranches => "class-reviewer-branches",
    TheDebugger => "the-debugger",
    TakeSomeBreaks => "take-some-breaks",
    MakeYourChoice => "make-your-choice",
    OnTheWatch => "on-the-watch",
    BreakTheLine => "break-the-line",
    BreakTheMethod => "break-the-method",
    ConsoleIsTheNewDebugMode => "console-is-the-new-debug-mode",
    ShineInNewSplendor => "shine-in-new-splendor",
    TheEponym => "the-eponym",
    MethodExtractor => "method-extractor",
    MethodInliner => "method-inliner",
    DoubleCheck => "double-check",
}

impl fmt::Display for AchievementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown achievement id `{0}`")]
pub struct UnknownAchievement(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Testing,
    Coverage,
    Debugging,
    TestRefactoring,
}

/// Achievement level. `None` is the initial value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    #[default]
    None,
    Bronze,
    Silver,
    Gold,
    Platinum,
}

impl Level {
    /// The four awardable levels in ascending order.
    pub const AWARDED: [Level; 4] = [Level::Bronze, Level::Silver, Level::Gold, Level::Platinum];

    /// Position in `AWARDED`; `None` for `Level::None`.
    pub fn tier(self) -> Option<usize> {
        match self {
            Level::None => None,
            Level::Bronze => Some(0),
            Level::Silver => Some(1),
            Level::Gold => Some(2),
            Level::Platinum => Some(3),
        }
    }

    pub fn from_tier(tier: usize) -> Level {
        Level::AWARDED[tier]
    }

    pub fn next(self) -> Option<Level> {
        match self {
            Level::None => Some(Level::Bronze),
            Level::Bronze => Some(Level::Silver),
            Level::Silver => Some(Level::Gold),
            Level::Gold => Some(Level::Platinum),
            Level::Platinum => None,
        }
    }

    pub fn rank(self) -> u32 {
        self.tier().map_or(0, |t| t as u32 + 1)
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::None => "None",
            Level::Bronze => "Bronze",
            Level::Silver => "Silver",
            Level::Gold => "Gold",
            Level::Platinum => "Platinum",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-level parameters of a multi-parameter achievement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tier {
    pub x: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub y: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub z: Option<u64>,
}

impl Tier {
    const fn xy(x: u64, y: u64) -> Tier {
        Tier { x, y: Some(y), z: None }
    }

    const fn xyz(x: u64, y: u64, z: u64) -> Tier {
        Tier { x, y: Some(y), z: Some(z) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundaries {
    Scalar([u64; 4]),
    Multi([Tier; 4]),
}

impl Boundaries {
    /// Threshold (scalar count or `X`) of an awardable level.
    pub fn threshold(&self, level: Level) -> Option<u64> {
        let tier = level.tier()?;
        Some(match self {
            Boundaries::Scalar(b) => b[tier],
            Boundaries::Multi(t) => t[tier].x,
        })
    }

    pub fn is_multi(&self) -> bool {
        matches!(self, Boundaries::Multi(_))
    }
}

/// Progress value of one achievement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Progress {
    Scalar(u64),
    /// One counter per awardable level.
    Counters([u64; 4]),
}

impl Progress {
    pub fn zero_for(boundaries: &Boundaries) -> Progress {
        match boundaries {
            Boundaries::Scalar(_) => Progress::Scalar(0),
            Boundaries::Multi(_) => Progress::Counters([0; 4]),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Progress::Scalar(v) => *v == 0,
            Progress::Counters(c) => c.iter().all(|v| *v == 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AchievementDef {
    pub id: AchievementId,
    pub category: Category,
    pub title: &'static str,
    pub description: &'static str,
    /// Noun used when printing the progress value ("tests", "runs").
    pub unit: &'static str,
    /// What the next level needs; `{x}`, `{y}` and `{z}` are filled from the
    /// next level's boundary.
    pub next_target_text: &'static str,
    pub boundaries: Boundaries,
}

const fn scalar(b: u64, s: u64, g: u64, p: u64) -> Boundaries {
    Boundaries::Scalar([b, s, g, p])
}

const fn def(
    id: AchievementId,
    category: Category,
    title: &'static str,
    description: &'static str,
    unit: &'static str,
    next_target_text: &'static str,
    boundaries: Boundaries,
) -> AchievementDef {
    AchievementDef { id, category, title, description, unit, next_target_text, boundaries }
}

use AchievementId as A;
use Category as C;

#[rustfmt::skip]
static CATALOG: [AchievementDef; 27] = [
    def(A::TestExecutor, C::Testing, "Test Executor", "Execute tests", "tests",
        "Execute {x} tests", scalar(3, 100, 1_000, 10_000)),
    def(A::TheTester, C::Testing, "The Tester", "Run test suites", "runs",
        "Run {x} test suites", scalar(3, 100, 1_000, 10_000)),
    def(A::TheTesterAdvanced, C::Testing, "The Tester — Advanced",
        "Run test suites X times containing at least Y tests", "runs",
        "Run {x} test suites containing at least {y} tests",
        Boundaries::Multi([Tier::xy(10, 100), Tier::xy(50, 500), Tier::xy(100, 1_000), Tier::xy(250, 3_000)])),
    def(A::AssertAndTested, C::Testing, "Assert and Tested", "Trigger AssertionErrors",
        "assertion errors", "Trigger {x} AssertionErrors", scalar(3, 10, 100, 1_000)),
    def(A::BugFinder, C::Testing, "Bug Finder",
        "Previously failed test passes again after source code change", "fixes",
        "Make a failed test pass again after a source code change {x} times",
        scalar(3, 10, 100, 1_000)),
    def(A::TestFixer, C::Testing, "Test Fixer",
        "Previously failed test passes again after test code change", "fixes",
        "Make a failed test pass again after a test code change {x} times",
        scalar(3, 10, 100, 1_000)),
    def(A::SafetyFirst, C::Testing, "Safety First", "Write tests", "tests",
        "Write {x} tests", scalar(10, 100, 1_000, 10_000)),
    def(A::GottaCatchEmAll, C::Coverage, "Gotta Catch ’Em All", "Run test suites with coverage",
        "runs", "Run {x} test suites with coverage", scalar(3, 10, 100, 1_000)),
    def(A::LineByLine, C::Coverage, "Line-by-line", "Cover lines with your tests", "lines",
        "Cover {x} lines with your tests", scalar(100, 1_000, 10_000, 100_000)),
    def(A::CheckYourMethods, C::Coverage, "Check your methods", "Cover methods with your tests",
        "methods", "Cover {x} methods with your tests", scalar(10, 100, 1_000, 10_000)),
    def(A::CheckYourClasses, C::Coverage, "Check your classes", "Cover classes with your tests",
        "classes", "Cover {x} classes with your tests", scalar(10, 100, 1_000, 10_000)),
    def(A::CheckYourBranches, C::Coverage, "Check your branches", "Cover branches with your tests",
        "branches", "Cover {x} branches with your tests", scalar(10, 100, 1_000, 10_000)),
    def(A::ClassReviewerLines, C::Coverage, "Class Reviewer - Lines",
        "Cover X classes with at least Y lines by Z% coverage", "classes",
        "Cover {x} classes with at least {y} lines by {z}% coverage",
        Boundaries::Multi([Tier::xyz(5, 5, 70), Tier::xyz(20, 25, 80), Tier::xyz(75, 250, 85), Tier::xyz(250, 500, 90)])),
    def(A::ClassReviewerMethods, C::Coverage, "Class Reviewer - Methods",
        "Cover X classes with at least Y methods by Z% coverage", "classes",
        "Cover {x} classes with at least {y} methods by {z}% coverage",
        Boundaries::Multi([Tier::xyz(10, 3, 60), Tier::xyz(50, 8, 80), Tier::xyz(250, 15, 85), Tier::xyz(500, 25, 90)])),
    def(A::ClassReviewerBranches, C::Coverage, "Class Reviewer - Branches",
        "Cover X classes with at least Y branches by Z% coverage", "classes",
        "Cover {x} classes with at least {y} branches by {z}% coverage",
        Boundaries::Multi([Tier::xyz(5, 15, 75), Tier::xyz(20, 50, 80), Tier::xyz(75, 250, 85), Tier::xyz(250, 500, 90)])),
    def(A::TheDebugger, C::Debugging, "The Debugger", "Run the code in debug mode", "debug runs",
        "Run the code in debug mode {x} times", scalar(3, 10, 100, 1_000)),
    def(A::TakeSomeBreaks, C::Debugging, "Take some breaks", "Set breakpoints", "breakpoints",
        "Set {x} breakpoints", scalar(10, 100, 1_000, 10_000)),
    def(A::MakeYourChoice, C::Debugging, "Make Your Choice", "Set conditional breakpoints",
        "breakpoints", "Set {x} conditional breakpoints", scalar(3, 10, 100, 1_000)),
    def(A::OnTheWatch, C::Debugging, "On the Watch", "Set field watchpoints", "watchpoints",
        "Set {x} field watchpoints", scalar(3, 10, 100, 1_000)),
    def(A::BreakTheLine, C::Debugging, "Break the Line", "Set line breakpoints", "breakpoints",
        "Set {x} line breakpoints", scalar(3, 10, 100, 1_000)),
    def(A::BreakTheMethod, C::Debugging, "Break the Method", "Set method breakpoints",
        "breakpoints", "Set {x} method breakpoints", scalar(3, 10, 100, 1_000)),
    def(A::ConsoleIsTheNewDebugMode, C::Debugging, "Console is the new Debug Mode",
        "Use System.out.println instead of debugger or logger", "prints",
        "Add {x} System.out.println statements", scalar(3, 10, 100, 1_000)),
    def(A::ShineInNewSplendor, C::TestRefactoring, "Shine in new splendor",
        "Change source code between two ensuing passing test runs", "refactorings",
        "Refactor between two passing test runs {x} times", scalar(5, 50, 500, 2_500)),
    def(A::TheEponym, C::TestRefactoring, "The Eponym", "Rename test method names", "renames",
        "Rename {x} test methods", scalar(10, 100, 1_000, 10_000)),
    def(A::MethodExtractor, C::TestRefactoring, "The Method Extractor",
        "Extract code from tests into a separate method", "extractions",
        "Extract code from tests into a separate method {x} times", scalar(10, 100, 1_000, 10_000)),
    def(A::MethodInliner, C::TestRefactoring, "The Method Inliner", "Inline methods into tests",
        "inlinings", "Inline methods into tests {x} times", scalar(10, 100, 1_000, 10_000)),
    def(A::DoubleCheck, C::TestRefactoring, "Double check",
        "Add new assertions to already passing tests", "assertions",
        "Add new assertions to already passing tests {x} times", scalar(3, 10, 100, 1_000)),
];

/// All 27 definitions in table order.
pub fn catalog() -> &'static [AchievementDef] {
    &CATALOG
}

pub fn lookup(id: AchievementId) -> &'static AchievementDef {
    // ALL and CATALOG share declaration order.
    &CATALOG[id as usize]
}

/// Greatest level reached by `progress`.
pub fn level_for(def: &AchievementDef, progress: &Progress) -> Level {
    match (&def.boundaries, progress) {
        (Boundaries::Scalar(b), Progress::Scalar(p)) => {
            b.iter().rposition(|bound| p >= bound).map_or(Level::None, Level::from_tier)
        }
        (Boundaries::Multi(tiers), Progress::Counters(c)) => {
            (0..4).rev().find(|&t| c[t] >= tiers[t].x).map_or(Level::None, Level::from_tier)
        }
        _ => Level::None,
    }
}

/// Next unreached level and its threshold; `None` once platinum is reached.
pub fn next_target(def: &AchievementDef, progress: &Progress) -> Option<(Level, u64)> {
    let next = level_for(def, progress).next()?;
    def.boundaries.threshold(next).map(|t| (next, t))
}

/// Value shown on the progress bar: the scalar count, or for multi-parameter
/// achievements the counter of the next unreached level (platinum's once
/// everything is reached).
pub fn display_progress(def: &AchievementDef, progress: &Progress) -> u64 {
    match progress {
        Progress::Scalar(v) => *v,
        Progress::Counters(c) => {
            let tier = level_for(def, progress).next().and_then(Level::tier).unwrap_or(3);
            c[tier]
        }
    }
}

/// Fraction of the way from the current level's boundary to the next one, in
/// `[0, 1)`; `1.0` once platinum is reached. Multi-parameter achievements
/// measure the next level's counter against its `X`.
pub fn interval_fraction(def: &AchievementDef, progress: &Progress) -> f64 {
    let level = level_for(def, progress);
    let Some((_, next)) = next_target(def, progress) else {
        return 1.0;
    };
    match progress {
        Progress::Scalar(v) => {
            let floor = def.boundaries.threshold(level).unwrap_or(0);
            (v - floor) as f64 / (next - floor) as f64
        }
        Progress::Counters(_) => display_progress(def, progress) as f64 / next as f64,
    }
}

/// Renders the next-target text, or `None` at platinum.
pub fn next_target_text(def: &AchievementDef, progress: &Progress) -> Option<String> {
    let (level, threshold) = next_target(def, progress)?;
    let mut text = def.next_target_text.replace("{x}", &threshold.to_string());
    if let (Boundaries::Multi(tiers), Some(t)) = (&def.boundaries, level.tier()) {
        if let Some(y) = tiers[t].y {
            text = text.replace("{y}", &y.to_string());
        }
        if let Some(z) = tiers[t].z {
            text = text.replace("{z}", &z.to_string());
        }
    }
    Some(text)
}

/// Pretty JSON dump of the catalog, as served by `achievements --json`.
pub fn catalog_json() -> String {
    let mut out = serde_json::to_string_pretty(catalog()).expect("catalog serializes");
    out.push('\n');
    out
}
