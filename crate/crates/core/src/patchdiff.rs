//! Unified-diff parsing and line-level patch comparison.
//!
//! A [`Patch`] is the structured form of a unified diff. A [`ChangeSet`] is
//! the multiset of its added and removed lines, which is what soft
//! verification intersects when it computes recall.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PatchError {
    #[error("parse error at byte {offset} (line {line}): {message}")]
    Parse {
        offset: usize,
        line: usize,
        message: String,
    },
    #[error("empty reference patch: recall is undefined")]
    EmptyReference,
}

/// Kind of a line inside a hunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Added,
    Removed,
    Context,
}

impl LineKind {
    fn marker(self) -> char {
        match self {
            LineKind::Added => '+',
            LineKind::Removed => '-',
            LineKind::Context => ' ',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HunkLine {
    pub kind: LineKind,
    pub text: String,
    /// Set when the line was followed by `\ No newline at end of file`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_newline: bool,
}

impl HunkLine {
    pub fn new(kind: LineKind, text: impl Into<String>) -> Self {
        Self {
            kind,
            text: text.into(),
            no_newline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: usize,
    pub new_start: usize,
    /// Trailing text of the `@@ ... @@` header (usually a function signature).
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub section: String,
    pub lines: Vec<HunkLine>,
}

impl Hunk {
    pub fn old_len(&self) -> usize {
        self.lines
            .iter()
            .filter(|l| l.kind != LineKind::Added)
            .count()
    }

    pub fn new_len(&self) -> usize {
        self.lines
            .iter()
            .filter(|l| l.kind != LineKind::Removed)
            .count()
    }

    pub fn change_count(&self) -> usize {
        self.lines
            .iter()
            .filter(|l| l.kind != LineKind::Context)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilePatch {
    /// Repository-relative path of the file after the change (the old path
    /// for deletions).
    pub path: String,
    /// Source path when it differs from `path` (renames, copies).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_path: Option<String>,
    /// Raw extended header lines (`diff --git`, `index`, mode and rename
    /// lines). Kept verbatim for re-serialization; they never produce
    /// change keys.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub headers: Vec<String>,
    #[serde(default)]
    pub is_new: bool,
    #[serde(default)]
    pub is_deleted: bool,
    pub hunks: Vec<Hunk>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub files: Vec<FilePatch>,
}

const DEV_NULL: &str = "/dev/null";

fn strip_prefix_path(raw: &str) -> &str {
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end();
    if raw == DEV_NULL {
        return raw;
    }
    raw.strip_prefix("a/")
        .or_else(|| raw.strip_prefix("b/"))
        .unwrap_or(raw)
}

struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        let mut lines = Vec::new();
        let mut offset = 0;
        for raw in text.split_inclusive('\n') {
            let line = raw.strip_suffix('\n').unwrap_or(raw);
            lines.push((offset, line));
            offset += raw.len();
        }
        Self { lines, pos: 0 }
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).map(|(_, l)| *l)
    }

    fn next(&mut self) -> Option<&'a str> {
        let line = self.peek();
        if line.is_some() {
            self.pos += 1;
        }
        line
    }

    fn error(&self, at: usize, message: impl Into<String>) -> PatchError {
        let offset = self
            .lines
            .get(at)
            .map(|(o, _)| *o)
            .unwrap_or_else(|| self.lines.last().map(|(o, l)| o + l.len()).unwrap_or(0));
        PatchError::Parse {
            offset,
            line: at + 1,
            message: message.into(),
        }
    }
}

fn parse_range(s: &str) -> Option<(usize, usize)> {
    match s.split_once(',') {
        Some((start, len)) => Some((start.parse().ok()?, len.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

/// Parses `@@ -a,b +c,d @@ section` into ((a, b), (c, d), section).
fn parse_hunk_header(line: &str) -> Option<((usize, usize), (usize, usize), String)> {
    let rest = line.strip_prefix("@@ -")?;
    let (old, rest) = rest.split_once(' ')?;
    let rest = rest.strip_prefix('+')?;
    let (new, rest) = rest.split_once(" @@")?;
    let section = rest.strip_prefix(' ').unwrap_or(rest).to_string();
    Some((parse_range(old)?, parse_range(new)?, section))
}

fn check_start(start: usize, len: usize) -> bool {
    start >= 1 || len == 0
}

/// Parses a unified diff. Text outside file sections (commit messages,
/// trailing signatures) is ignored.
pub fn parse_unified_diff(text: &str) -> Result<Patch, PatchError> {
    let mut cur = Cursor::new(text);
    let mut files = Vec::new();
    let mut pending_headers: Vec<String> = Vec::new();
    let mut pending_old_path: Option<String> = None;
    let mut pending_new: bool = false;
    let mut pending_deleted: bool = false;

    while let Some(line) = cur.peek() {
        if line.starts_with("diff --git ") {
            if !pending_headers.is_empty() {
                // Header-only section (pure rename or mode change).
                files.push(header_only_file(
                    std::mem::take(&mut pending_headers),
                    pending_old_path.take(),
                    std::mem::take(&mut pending_new),
                    std::mem::take(&mut pending_deleted),
                ));
            }
            pending_headers.push(line.to_string());
            cur.next();
            continue;
        }
        if !pending_headers.is_empty() && !line.starts_with("--- ") {
            if let Some(from) = line.strip_prefix("rename from ") {
                pending_old_path = Some(from.to_string());
            }
            if line.starts_with("new file mode") {
                pending_new = true;
            }
            if line.starts_with("deleted file mode") {
                pending_deleted = true;
            }
            if line.starts_with("@@") {
                return Err(cur.error(cur.pos, "hunk header before file header"));
            }
            pending_headers.push(line.to_string());
            cur.next();
            continue;
        }
        if let Some(old_raw) = line.strip_prefix("--- ") {
            let old_idx = cur.pos;
            cur.next();
            let Some(new_raw) = cur.peek().and_then(|l| l.strip_prefix("+++ ")) else {
                return Err(cur.error(old_idx + 1, "expected '+++' line after '---'"));
            };
            cur.next();
            let old_path = strip_prefix_path(old_raw).to_string();
            let new_path = strip_prefix_path(new_raw).to_string();
            let is_new = pending_new || old_path == DEV_NULL;
            let is_deleted = pending_deleted || new_path == DEV_NULL;
            let path = if new_path == DEV_NULL {
                old_path.clone()
            } else {
                new_path.clone()
            };
            let old_path = if old_path != path && old_path != DEV_NULL {
                Some(old_path)
            } else {
                pending_old_path.take().filter(|p| p != &path)
            };
            pending_old_path = None;
            pending_new = false;
            pending_deleted = false;
            let hunks = parse_hunks(&mut cur)?;
            files.push(FilePatch {
                path,
                old_path,
                headers: std::mem::take(&mut pending_headers),
                is_new,
                is_deleted,
                hunks,
            });
            continue;
        }
        if line.starts_with("@@") {
            return Err(cur.error(cur.pos, "hunk header before file header"));
        }
        cur.next();
    }
    if !pending_headers.is_empty() {
        files.push(header_only_file(
            pending_headers,
            pending_old_path,
            pending_new,
            pending_deleted,
        ));
    }
    Ok(Patch { files })
}

fn header_only_file(
    headers: Vec<String>,
    rename_from: Option<String>,
    is_new: bool,
    is_deleted: bool,
) -> FilePatch {
    let mut path = String::new();
    let mut old_path = rename_from;
    for h in &headers {
        if let Some(to) = h.strip_prefix("rename to ") {
            path = to.to_string();
        }
    }
    if path.is_empty() {
        if let Some(rest) = headers[0].strip_prefix("diff --git ") {
            if let Some((a, b)) = rest.split_once(" b/") {
                path = b.to_string();
                let a = a.strip_prefix("a/").unwrap_or(a);
                if old_path.is_none() && a != path {
                    old_path = Some(a.to_string());
                }
            }
        }
    }
    FilePatch {
        path,
        old_path,
        headers,
        is_new,
        is_deleted,
        hunks: Vec::new(),
    }
}

fn parse_hunks(cur: &mut Cursor<'_>) -> Result<Vec<Hunk>, PatchError> {
    let mut hunks = Vec::new();
    while let Some(line) = cur.peek() {
        if !line.starts_with("@@") {
            break;
        }
        let header_idx = cur.pos;
        let ((old_start, old_len), (new_start, new_len), section) = parse_hunk_header(line)
            .ok_or_else(|| cur.error(header_idx, format!("malformed hunk header: {line:?}")))?;
        if !check_start(old_start, old_len) || !check_start(new_start, new_len) {
            return Err(cur.error(header_idx, "hunk line numbers must be >= 1"));
        }
        cur.next();

        let (mut old_seen, mut new_seen) = (0usize, 0usize);
        let mut lines: Vec<HunkLine> = Vec::new();
        while old_seen < old_len || new_seen < new_len {
            let idx = cur.pos;
            let Some(body) = cur.next() else {
                return Err(cur.error(
                    idx,
                    format!(
                        "truncated hunk: expected {old_len} old / {new_len} new lines, got {old_seen} / {new_seen}"
                    ),
                ));
            };
            let (kind, text) = match body.chars().next() {
                Some('+') => (LineKind::Added, &body[1..]),
                Some('-') => (LineKind::Removed, &body[1..]),
                Some(' ') => (LineKind::Context, &body[1..]),
                // Some tools strip the leading space from blank context lines.
                None => (LineKind::Context, ""),
                Some('\\') => {
                    mark_no_newline(&mut lines);
                    continue;
                }
                Some(_) => {
                    return Err(cur.error(
                        idx,
                        format!(
                            "truncated hunk: unexpected line {body:?} after {old_seen} / {new_seen} lines"
                        ),
                    ))
                }
            };
            match kind {
                LineKind::Added => new_seen += 1,
                LineKind::Removed => old_seen += 1,
                LineKind::Context => {
                    old_seen += 1;
                    new_seen += 1;
                }
            }
            if old_seen > old_len || new_seen > new_len {
                return Err(cur.error(idx, "hunk body longer than its header declares"));
            }
            lines.push(HunkLine::new(kind, text));
        }
        if cur.peek().is_some_and(|l| l.starts_with('\\')) {
            cur.next();
            mark_no_newline(&mut lines);
        }
        if lines.iter().all(|l| l.kind == LineKind::Context) {
            return Err(cur.error(header_idx, "hunk contains no added or removed lines"));
        }
        hunks.push(Hunk {
            old_start,
            new_start,
            section,
            lines,
        });
    }
    Ok(hunks)
}

fn mark_no_newline(lines: &mut [HunkLine]) {
    if let Some(last) = lines.last_mut() {
        last.no_newline = true;
    }
}

impl fmt::Display for Patch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for file in &self.files {
            for h in &file.headers {
                writeln!(f, "{h}")?;
            }
            if file.hunks.is_empty() {
                continue;
            }
            let old = if file.is_new {
                DEV_NULL.to_string()
            } else {
                format!("a/{}", file.old_path.as_deref().unwrap_or(&file.path))
            };
            let new = if file.is_deleted {
                DEV_NULL.to_string()
            } else {
                format!("b/{}", file.path)
            };
            writeln!(f, "--- {old}")?;
            writeln!(f, "+++ {new}")?;
            for hunk in &file.hunks {
                write!(
                    f,
                    "@@ -{},{} +{},{} @@",
                    hunk.old_start,
                    hunk.old_len(),
                    hunk.new_start,
                    hunk.new_len()
                )?;
                if hunk.section.is_empty() {
                    writeln!(f)?;
                } else {
                    writeln!(f, " {}", hunk.section)?;
                }
                for line in &hunk.lines {
                    writeln!(f, "{}{}", line.kind.marker(), line.text)?;
                    if line.no_newline {
                        writeln!(f, "\\ No newline at end of file")?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Whether file paths participate in line identity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityMode {
    #[default]
    WithPath,
    PathAgnostic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Added,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChangeKey {
    /// `None` is the wildcard used in path-agnostic mode.
    pub path: Option<String>,
    pub kind: ChangeKind,
    pub text: String,
}

/// Multiset of normalized added/removed lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeSet {
    entries: BTreeMap<ChangeKey, usize>,
}

impl ChangeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: ChangeKey) {
        *self.entries.entry(key).or_insert(0) += 1;
    }

    pub fn multiplicity(&self, key: &ChangeKey) -> usize {
        self.entries.get(key).copied().unwrap_or(0)
    }

    /// Total number of entries counting multiplicity.
    pub fn cardinality(&self) -> usize {
        self.entries.values().sum()
    }

    /// Number of distinct keys.
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ChangeKey, usize)> {
        self.entries.iter().map(|(k, n)| (k, *n))
    }

    /// Size of the multiset intersection (per-key minimum multiplicity).
    pub fn intersection_size(&self, other: &ChangeSet) -> usize {
        let (small, large) = if self.distinct() <= other.distinct() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .entries
            .iter()
            .map(|(k, n)| (*n).min(large.multiplicity(k)))
            .sum()
    }
}

impl FromIterator<ChangeKey> for ChangeSet {
    fn from_iter<T: IntoIterator<Item = ChangeKey>>(iter: T) -> Self {
        let mut set = ChangeSet::new();
        for key in iter {
            set.insert(key);
        }
        set
    }
}

pub fn normalize_line(text: &str) -> &str {
    text.trim_end()
}

pub fn change_set(patch: &Patch, mode: IdentityMode) -> ChangeSet {
    let mut set = ChangeSet::new();
    for file in &patch.files {
        let path = match mode {
            IdentityMode::WithPath => Some(file.path.clone()),
            IdentityMode::PathAgnostic => None,
        };
        for line in file.hunks.iter().flat_map(|h| &h.lines) {
            let kind = match line.kind {
                LineKind::Added => ChangeKind::Added,
                LineKind::Removed => ChangeKind::Removed,
                LineKind::Context => continue,
            };
            set.insert(ChangeKey {
                path: path.clone(),
                kind,
                text: normalize_line(&line.text).to_string(),
            });
        }
    }
    set
}

/// Line-level recall `|candidate ∩ reference| / |reference|`.
pub fn recall(candidate: &ChangeSet, reference: &ChangeSet) -> Result<f64, PatchError> {
    let total = reference.cardinality();
    if total == 0 {
        return Err(PatchError::EmptyReference);
    }
    Ok(candidate.intersection_size(reference) as f64 / total as f64)
}

pub fn patch_total_lines(patch: &Patch) -> usize {
    patch
        .files
        .iter()
        .flat_map(|f| &f.hunks)
        .map(Hunk::change_count)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct NormalizedHunk {
    old_start: usize,
    new_start: usize,
    lines: Vec<(LineKind, String)>,
}

/// Canonical form used for duplicate detection: files sorted by path,
/// every hunk line trailing-whitespace trimmed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NormalizedPatch(Vec<(String, Vec<NormalizedHunk>)>);

impl Patch {
    pub fn normalized(&self) -> NormalizedPatch {
        let mut files: Vec<_> = self
            .files
            .iter()
            .filter(|f| !f.hunks.is_empty())
            .map(|f| {
                let hunks = f
                    .hunks
                    .iter()
                    .map(|h| NormalizedHunk {
                        old_start: h.old_start,
                        new_start: h.new_start,
                        lines: h
                            .lines
                            .iter()
                            .map(|l| (l.kind, normalize_line(&l.text).to_string()))
                            .collect(),
                    })
                    .collect();
                (f.path.clone(), hunks)
            })
            .collect();
        files.sort();
        NormalizedPatch(files)
    }

    pub fn is_empty(&self) -> bool {
        patch_total_lines(self) == 0
    }
}

pub fn patches_identical(a: &Patch, b: &Patch) -> bool {
    change_set(a, IdentityMode::WithPath) == change_set(b, IdentityMode::WithPath)
        && a.normalized() == b.normalized()
}
