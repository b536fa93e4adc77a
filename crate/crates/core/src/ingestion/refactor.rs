//! Conservative detection of rename, extract-method and inline-method
//! refactorings between two versions of a Java file.
//!
//! All three patterns are matched on comment- and whitespace-free token
//! streams and only inside one class:
//!
//! - rename: a method disappears and exactly one new method in the same
//!   class has a token-identical body (and parameter list);
//! - extract: a new method's body occurs verbatim in the previous body of a
//!   surviving method, whose new body is the old one with that slice
//!   replaced by a short statement calling the new method;
//! - inline: the extract pattern with the two versions swapped.

use std::collections::{BTreeMap, BTreeSet};

use super::java::{self, JavaFile, JavaMethod};
use crate::events::{Refactoring, RefactoringType};

/// Longest call-site statement accepted in place of the extracted code.
const MAX_CALL_SITE_TOKENS: usize = 24;

type MethodKey<'a> = (&'a str, &'a str);

fn index(file: &JavaFile) -> BTreeMap<MethodKey<'_>, &JavaMethod> {
    let mut map = BTreeMap::new();
    for m in &file.methods {
        map.entry((m.class_name.as_str(), m.name.as_str())).or_insert(m);
    }
    map
}

pub fn detect_refactorings(prev: &str, next: &str) -> Vec<Refactoring> {
    detect_in(&java::parse(prev), &java::parse(next))
}

pub fn detect_in(prev: &JavaFile, next: &JavaFile) -> Vec<Refactoring> {
    let before = index(prev);
    let after = index(next);
    let removed: Vec<_> = before.keys().filter(|k| !after.contains_key(*k)).copied().collect();
    let added: Vec<_> = after.keys().filter(|k| !before.contains_key(*k)).copied().collect();

    let mut out = Vec::new();
    let mut renamed_from = BTreeSet::new();
    let mut renamed_to = BTreeSet::new();
    for r in &removed {
        let old = before[r];
        let candidates: Vec<_> = added.iter().filter(|a| a.0 == r.0 && same_shape(old, after[*a])).collect();
        let [a] = candidates.as_slice() else { continue };
        let reverse = removed.iter().filter(|x| x.0 == a.0 && same_shape(before[*x], after[*a])).count();
        if reverse == 1 {
            renamed_from.insert(*r);
            renamed_to.insert(**a);
            out.push(Refactoring { rtype: RefactoringType::Rename, target: a.1.to_string(), source: r.1.to_string() });
        }
    }

    let survivors: Vec<_> = before.keys().filter(|k| after.contains_key(*k)).copied().collect();
    for a in added.iter().filter(|a| !renamed_to.contains(*a)) {
        let helper = after[a];
        let host = survivors
            .iter()
            .find(|s| s.0 == a.0 && moved_into_helper(&before[*s].body, &after[*s].body, &helper.name, &helper.body));
        if let Some(host) = host {
            out.push(Refactoring {
                rtype: RefactoringType::ExtractMethod,
                target: a.1.to_string(),
                source: host.1.to_string(),
            });
        }
    }
    for r in removed.iter().filter(|r| !renamed_from.contains(*r)) {
        let helper = before[r];
        let host = survivors
            .iter()
            .find(|s| s.0 == r.0 && moved_into_helper(&after[*s].body, &before[*s].body, &helper.name, &helper.body));
        if let Some(host) = host {
            out.push(Refactoring {
                rtype: RefactoringType::InlineMethod,
                target: r.1.to_string(),
                source: host.1.to_string(),
            });
        }
    }
    out
}

fn same_shape(a: &JavaMethod, b: &JavaMethod) -> bool {
    a.body == b.body && a.params == b.params
}

/// `with_code` contains `helper_body` verbatim at some position `i`, and
/// `with_call` equals `with_code` where that slice is replaced by a short
/// statement that calls `helper`.
fn moved_into_helper(with_code: &[String], with_call: &[String], helper: &str, helper_body: &[String]) -> bool {
    // A helper ending in `return x;` hands back a local built by the moved code.
    let returns_local = helper_body.len() > 3
        && helper_body[helper_body.len() - 3] == "return"
        && is_identifier(&helper_body[helper_body.len() - 2])
        && helper_body[helper_body.len() - 1] == ";";
    if returns_local && moved_slice(with_code, with_call, helper, &helper_body[..helper_body.len() - 3]) {
        return true;
    }
    moved_slice(with_code, with_call, helper, helper_body)
}

fn is_identifier(t: &str) -> bool {
    t.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$')
        && t.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

fn moved_slice(with_code: &[String], with_call: &[String], helper: &str, helper_body: &[String]) -> bool {
    // A lone `return` or a single token is too weak a signal.
    if helper_body.len() < 3 || !helper_body.iter().any(|t| t == ";") {
        return false;
    }
    let n = helper_body.len();
    if with_code.len() < n {
        return false;
    }
    (0..=with_code.len() - n).any(|i| {
        if with_code[i..i + n] != *helper_body {
            return false;
        }
        let prefix = &with_code[..i];
        let suffix = &with_code[i + n..];
        if with_call.len() < prefix.len() + suffix.len()
            || !with_call.starts_with(prefix)
            || !with_call.ends_with(suffix)
        {
            return false;
        }
        let call = &with_call[prefix.len()..with_call.len() - suffix.len()];
        is_call_statement(call, helper)
    })
}

fn is_call_statement(call: &[String], helper: &str) -> bool {
    if call.is_empty() || call.len() > MAX_CALL_SITE_TOKENS || call.last().map(String::as_str) != Some(";") {
        return false;
    }
    let has_call = call.windows(2).any(|w| w[0] == helper && w[1] == "(");
    let single_statement = call[..call.len() - 1].iter().all(|t| t != ";" && t != "{" && t != "}");
    has_call && single_statement
}
