use std::collections::BTreeMap;
use std::path::Path;

use globset::GlobSet;
use sha2::{Digest, Sha256};

use super::java::{self, JavaFile};
use super::refactor;
use crate::events::{ChangeFact, FileClass};

/// Last known content of a watched source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileSnapshot {
    pub path: String,
    pub hash: String,
    /// `None` for binary content.
    pub content: Option<String>,
    pub file_class: FileClass,
}

impl FileSnapshot {
    pub fn new(path: &str, bytes: &[u8], test_roots: &GlobSet) -> FileSnapshot {
        let content = text_of(bytes);
        let file_class = classify_file(path, content.as_deref(), test_roots);
        FileSnapshot { path: path.to_string(), hash: content_hash(bytes), content, file_class }
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn text_of(bytes: &[u8]) -> Option<String> {
    let s = std::str::from_utf8(bytes).ok()?;
    (!s.contains('\0')).then(|| s.to_string())
}

/// A file is test code when it lies under a test root or declares an
/// `@Test` method.
pub fn classify_file(path: &str, content: Option<&str>, test_roots: &GlobSet) -> FileClass {
    let under_root = test_roots.is_match(Path::new(path));
    let annotated = content.is_some_and(|c| java::parse(c).methods.iter().any(|m| m.is_test()));
    if under_root || annotated {
        FileClass::Test
    } else {
        FileClass::Production
    }
}

/// Change facts for a new version of a file. Returns no facts when the bytes
/// are unchanged and `[GenericEdit]` when nothing more specific applies.
pub fn classify_change(prev: Option<&FileSnapshot>, next: &[u8], print_pattern: &str) -> Vec<ChangeFact> {
    if prev.is_some_and(|p| p.hash == content_hash(next)) {
        return Vec::new();
    }
    let Some(next_text) = text_of(next) else {
        return vec![ChangeFact::GenericEdit {}];
    };
    let prev_text = prev.and_then(|p| p.content.as_deref());
    let mut facts = semantic_facts(prev_text, &next_text, print_pattern);
    if facts.is_empty() {
        facts.push(ChangeFact::GenericEdit {});
    }
    facts
}

fn semantic_facts(prev: Option<&str>, next: &str, print_pattern: &str) -> Vec<ChangeFact> {
    let prev_tokens = java::tokenize(prev.unwrap_or_default());
    let next_tokens = java::tokenize(next);
    let same_tokens =
        prev_tokens.len() == next_tokens.len() && prev_tokens.iter().zip(&next_tokens).all(|(a, b)| a.text == b.text);
    if prev.is_some() && same_tokens {
        return Vec::new();
    }
    let before = prev.map_or_else(JavaFile::default, |_| java::segment(&prev_tokens));
    let after = java::segment(&next_tokens);
    let refactorings = refactor::detect_in(&before, &after);
    let renamed_to: Vec<&str> = refactorings
        .iter()
        .filter(|r| r.rtype == crate::events::RefactoringType::Rename)
        .map(|r| r.target.as_str())
        .collect();

    let mut facts = Vec::new();
    for m in after.methods.iter().filter(|m| m.is_test()) {
        match before.method(&m.class_name, &m.name) {
            None if !renamed_to.contains(&m.name.as_str()) => facts
                .push(ChangeFact::TestMethodAdded { class_name: m.class_name.clone(), method_name: m.name.clone() }),
            Some(old) if m.assertion_count() > old.assertion_count() => facts.push(ChangeFact::AssertionAddedToTest {
                class_name: m.class_name.clone(),
                method_name: m.name.clone(),
            }),
            _ => {}
        }
    }
    if !print_pattern.is_empty() {
        for line in added_lines(prev.unwrap_or_default(), next) {
            if line.contains(print_pattern) {
                facts.push(ChangeFact::PrintStatementAdded { line: line.to_string() });
            }
        }
    }
    facts.extend(refactorings.into_iter().map(ChangeFact::RefactoringDetected));
    facts
}

/// Trimmed lines of `next` beyond their multiplicity in `prev`, in order of
/// appearance.
fn added_lines<'a>(prev: &str, next: &'a str) -> Vec<&'a str> {
    let mut budget: BTreeMap<&str, usize> = BTreeMap::new();
    for l in prev.lines() {
        *budget.entry(l.trim()).or_default() += 1;
    }
    let mut out = Vec::new();
    for l in next.lines().map(str::trim).filter(|l| !l.is_empty()) {
        match budget.get_mut(l) {
            Some(n) if *n > 0 => *n -= 1,
            _ => out.push(l),
        }
    }
    out
}
