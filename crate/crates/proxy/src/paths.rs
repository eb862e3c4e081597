//! Prefix rewriting between the user's working directory and the
//! directory the model was trained in.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathPolicyError {
    #[error("{which} root `{path}` is not absolute")]
    NotAbsolute { which: &'static str, path: String },
    #[error("roots `{0}` and `{1}` nest inside one another")]
    Nested(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathPolicy {
    canonical_root: String,
    user_root: String,
}

impl PathPolicy {
    pub fn new(canonical_root: &str, user_root: &str) -> Result<Self, PathPolicyError> {
        let canonical_root = trim_root(canonical_root);
        let user_root = trim_root(user_root);
        for (which, p) in [("canonical", &canonical_root), ("user", &user_root)] {
            if !p.starts_with('/') {
                return Err(PathPolicyError::NotAbsolute { which, path: p.clone() });
            }
        }
        if canonical_root != user_root
            && (is_path_prefix(&canonical_root, &user_root) || is_path_prefix(&user_root, &canonical_root))
        {
            return Err(PathPolicyError::Nested(canonical_root, user_root));
        }
        Ok(Self { canonical_root, user_root })
    }

    pub fn canonical_root(&self) -> &str {
        &self.canonical_root
    }

    pub fn user_root(&self) -> &str {
        &self.user_root
    }

    /// User paths → canonical paths (request direction).
    pub fn to_canonical(&self, text: &str) -> String {
        rewrite(text, &self.user_root, &self.canonical_root, None)
    }

    /// Canonical paths → user paths (response direction).
    pub fn to_user(&self, text: &str) -> String {
        rewrite(text, &self.canonical_root, &self.user_root, None)
    }

    pub fn to_canonical_value(&self, v: &Value) -> Value {
        map_strings(v, &|s| self.to_canonical(s))
    }

    pub fn to_user_value(&self, v: &Value) -> Value {
        map_strings(v, &|s| self.to_user(s))
    }
}

fn trim_root(p: &str) -> String {
    let t = p.trim_end_matches('/');
    if t.is_empty() { "/".into() } else { t.into() }
}

fn is_path_prefix(prefix: &str, path: &str) -> bool {
    prefix == "/" || path == prefix || path.strip_prefix(prefix).is_some_and(|r| r.starts_with('/'))
}

fn map_strings(v: &Value, f: &dyn Fn(&str) -> String) -> Value {
    match v {
        Value::String(s) => Value::String(f(s)),
        Value::Array(a) => Value::Array(a.iter().map(|x| map_strings(x, f)).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, x)| (k.clone(), map_strings(x, f))).collect()),
        other => other.clone(),
    }
}

/// Characters that can continue a path segment.
pub(crate) fn is_segment_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '~' | '+' | '@' | '%')
}

fn boundary_before(prev: Option<char>) -> bool {
    prev.is_none_or(|c| !is_segment_char(c))
}

/// `rest` is the text right after a root match. `None` means the answer
/// depends on text not seen yet.
pub(crate) fn boundary_after(rest: &str) -> Option<bool> {
    let mut it = rest.chars();
    match it.next() {
        None => None,
        Some('/') => Some(true),
        // trailing sentence punctuation, not an extension
        Some('.') => it.next().map(|c| !is_segment_char(c)),
        Some(c) => Some(!is_segment_char(c)),
    }
}

/// Replaces each occurrence of `from` that sits on path boundaries.
/// `prev` is the character preceding `text` in a longer stream.
/// A match at the very end of `text` counts as bounded.
pub(crate) fn rewrite(text: &str, from: &str, to: &str, prev: Option<char>) -> String {
    if from == to || from == "/" {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    let mut i = 0;
    while let Some(off) = text[i..].find(from) {
        let start = i + off;
        let before = if start == 0 { prev } else { text[..start].chars().next_back() };
        let end = start + from.len();
        if boundary_before(before) && boundary_after(&text[end..]).unwrap_or(true) {
            out.push_str(&text[last..start]);
            out.push_str(to);
            last = end;
            i = end;
        } else {
            i = start + from.chars().next().map_or(1, char::len_utf8);
        }
    }
    out.push_str(&text[last..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy() -> PathPolicy {
        PathPolicy::new("/testbed", "/home/dev/proj").unwrap()
    }

    #[test]
    fn rewrites_on_boundaries_only() {
        let p = policy();
        assert_eq!(p.to_canonical("see /home/dev/proj/src/a.py now"), "see /testbed/src/a.py now");
        assert_eq!(p.to_canonical("/home/dev/project/x"), "/home/dev/project/x");
        assert_eq!(p.to_canonical("cd /home/dev/proj."), "cd /testbed.");
        assert_eq!(p.to_canonical("/home/dev/proj.bak"), "/home/dev/proj.bak");
        assert_eq!(p.to_canonical("x/home/dev/proj"), "x/home/dev/proj");
        assert_eq!(p.to_canonical("`/home/dev/proj`"), "`/testbed`");
        assert_eq!(p.to_user("file:///testbed/a"), "file:///home/dev/proj/a");
    }

    #[test]
    fn rejects_bad_roots() {
        assert!(matches!(PathPolicy::new("testbed", "/a"), Err(PathPolicyError::NotAbsolute { .. })));
        assert!(matches!(PathPolicy::new("/a", "/a/b"), Err(PathPolicyError::Nested(..))));
        assert!(PathPolicy::new("/a/", "/a").is_ok());
        assert!(PathPolicy::new("/ab", "/a").is_ok());
    }

    #[test]
    fn values_rewrite_recursively() {
        let v = serde_json::json!({"file_path": "/home/dev/proj/a.py", "n": 3, "l": ["/home/dev/proj"]});
        let c = policy().to_canonical_value(&v);
        assert_eq!(c["file_path"], "/testbed/a.py");
        assert_eq!(c["l"][0], "/testbed");
        assert_eq!(policy().to_user_value(&c), v);
    }
}
