//! Per-rollout scratch copy of a codebase plus the agent's tools.
//!
//! The agent sees the tree at [`WORKDIR`]. Tool failures are returned as
//! observation text (the model is expected to recover), never as errors.

use std::collections::BTreeSet;
use std::fs;
use std::io::Read;
use std::path::{Component, Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use similar::TextDiff;
use tempfile::TempDir;
use walkdir::WalkDir;

use super::functions::is_hidden_or_skipped;
use super::OrchestrateError;

pub const WORKDIR: &str = "/testbed";

pub const EDITOR_TOOL: &str = "str_replace_editor";
pub const BASH_TOOL: &str = "bash";
pub const SUBMIT_TOOL: &str = "submit";

const SHELL_METACHARACTERS: &[char] = &[';', '|', '&', '$', '>', '<', '`', '\n', '(', ')'];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShellPolicy {
    #[serde(default)]
    pub enabled: bool,
    /// Program names that may be run; arguments are passed without a shell.
    #[serde(default = "default_allow")]
    pub allow: Vec<String>,
    #[serde(default = "default_shell_timeout")]
    pub timeout_secs: u64,
}

fn default_allow() -> Vec<String> {
    ["ls", "cat", "grep", "find", "head", "tail", "wc", "python", "python3"]
        .into_iter()
        .map(String::from)
        .collect()
}

fn default_shell_timeout() -> u64 {
    30
}

impl Default for ShellPolicy {
    fn default() -> Self {
        Self {
            enabled: false,
            allow: default_allow(),
            timeout_secs: default_shell_timeout(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolOutcome {
    pub output: String,
    /// Set by `submit`: the final patch (possibly empty).
    pub submitted: Option<String>,
}

impl ToolOutcome {
    fn text(output: impl Into<String>) -> Self {
        Self {
            output: output.into(),
            submitted: None,
        }
    }
}

pub struct Sandbox {
    original: PathBuf,
    dir: TempDir,
    shell: ShellPolicy,
}

fn tree_files(root: &Path) -> Result<BTreeSet<String>, OrchestrateError> {
    let mut out = BTreeSet::new();
    let walker = WalkDir::new(root)
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !is_hidden_or_skipped(&e.file_name().to_string_lossy()));
    for entry in walker {
        let entry = entry.map_err(|e| OrchestrateError::io(root, e.into()))?;
        if entry.file_type().is_file() {
            let rel = entry.path().strip_prefix(root).expect("under root");
            out.insert(rel_string(rel));
        }
    }
    Ok(out)
}

fn rel_string(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn read_optional(path: &Path) -> Result<Option<Vec<u8>>, OrchestrateError> {
    match fs::read(path) {
        Ok(b) => Ok(Some(b)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(OrchestrateError::io(path, e)),
    }
}

impl Sandbox {
    pub fn new(root: &Path, shell: ShellPolicy) -> Result<Self, OrchestrateError> {
        let dir = tempfile::Builder::new()
            .prefix("svg-sandbox-")
            .tempdir()
            .map_err(|e| OrchestrateError::io(Path::new("<tempdir>"), e))?;
        for rel in tree_files(root)? {
            let src = root.join(&rel);
            let dst = dir.path().join(&rel);
            if let Some(parent) = dst.parent() {
                fs::create_dir_all(parent).map_err(|e| OrchestrateError::io(parent, e))?;
            }
            fs::copy(&src, &dst).map_err(|e| OrchestrateError::io(&src, e))?;
        }
        Ok(Self {
            original: root.to_path_buf(),
            dir,
            shell,
        })
    }

    /// Real location of the working copy.
    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    /// Maps an agent-visible path to a location inside the working copy.
    fn resolve(&self, raw: &str) -> Result<(PathBuf, String), String> {
        let rel = if raw == WORKDIR {
            ""
        } else if let Some(r) = raw.strip_prefix(WORKDIR).and_then(|r| r.strip_prefix('/')) {
            r
        } else if raw.starts_with('/') {
            return Err(format!("The path {raw} is not under {WORKDIR}."));
        } else {
            raw
        };
        let rel = Path::new(rel);
        if rel.components().any(|c| !matches!(c, Component::Normal(_) | Component::CurDir)) {
            return Err(format!("The path {raw} escapes {WORKDIR}."));
        }
        let shown = if rel.as_os_str().is_empty() {
            WORKDIR.to_string()
        } else {
            format!("{WORKDIR}/{}", rel_string(rel))
        };
        Ok((self.dir.path().join(rel), shown))
    }

    pub fn execute(&mut self, name: &str, args: &Map<String, Value>) -> ToolOutcome {
        let result = match name {
            EDITOR_TOOL => self.editor(args),
            BASH_TOOL => self.bash(args),
            SUBMIT_TOOL => {
                return match self.diff() {
                    Ok(patch) => ToolOutcome {
                        output: patch.clone(),
                        submitted: Some(patch),
                    },
                    Err(e) => ToolOutcome::text(format!("Error: could not compute the patch: {e}")),
                }
            }
            other => Err(format!(
                "Unknown tool `{other}`. Available tools: {EDITOR_TOOL}, {BASH_TOOL}, {SUBMIT_TOOL}."
            )),
        };
        match result {
            Ok(s) => ToolOutcome::text(s),
            Err(s) => ToolOutcome::text(format!("Error: {s}")),
        }
    }

    fn editor(&mut self, args: &Map<String, Value>) -> Result<String, String> {
        let arg = |k: &str| args.get(k).and_then(Value::as_str);
        let command = arg("command").ok_or("missing required parameter `command`")?;
        let raw = arg("path").ok_or("missing required parameter `path`")?;
        let (path, shown) = self.resolve(raw)?;
        match command {
            "view" => self.view(&path, &shown, args.get("view_range")),
            "str_replace" => {
                let old = arg("old_str").ok_or("missing required parameter `old_str`")?;
                let new = arg("new_str").unwrap_or("");
                let text = fs::read_to_string(&path).map_err(|_| format!("The path {shown} is not a readable file."))?;
                match text.matches(old).count() {
                    0 => Err(format!(
                        "No replacement was performed, old_str `{old}` did not appear verbatim in {shown}."
                    )),
                    1 => {
                        fs::write(&path, text.replacen(old, new, 1)).map_err(|e| e.to_string())?;
                        Ok(format!("The file {shown} has been edited."))
                    }
                    n => Err(format!(
                        "No replacement was performed. old_str `{old}` occurs {n} times in {shown}; make it unique."
                    )),
                }
            }
            "create" => {
                let body = arg("file_text").ok_or("missing required parameter `file_text`")?;
                if path.exists() {
                    return Err(format!("File already exists at: {shown}. Cannot overwrite files using command `create`."));
                }
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent).map_err(|e| e.to_string())?;
                }
                fs::write(&path, body).map_err(|e| e.to_string())?;
                Ok(format!("File created successfully at: {shown}"))
            }
            other => Err(format!("Unrecognized command `{other}`. Allowed: view, str_replace, create.")),
        }
    }

    fn view(&self, path: &Path, shown: &str, range: Option<&Value>) -> Result<String, String> {
        if path.is_dir() {
            let mut out = format!(
                "Here's the files and directories up to 2 levels deep in {shown}, excluding hidden items:\n{shown}\n"
            );
            let walker = WalkDir::new(path)
                .min_depth(1)
                .max_depth(2)
                .sort_by_file_name()
                .into_iter()
                .filter_entry(|e| !is_hidden_or_skipped(&e.file_name().to_string_lossy()));
            for e in walker.flatten() {
                let rel = e.path().strip_prefix(path).expect("under dir");
                out.push_str(&format!("{shown}/{}\n", rel_string(rel)));
            }
            return Ok(out);
        }
        let text = fs::read_to_string(path).map_err(|_| format!("The path {shown} does not exist."))?;
        let lines: Vec<&str> = text.lines().collect();
        let (start, end) = match range {
            None => (1, lines.len()),
            Some(v) => {
                let pair = v
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .and_then(|a| Some((a[0].as_i64()?, a[1].as_i64()?)))
                    .ok_or("view_range must be a list of two integers")?;
                let end = if pair.1 == -1 { lines.len() as i64 } else { pair.1 };
                if pair.0 < 1 || end < pair.0 || end as usize > lines.len() {
                    return Err(format!("Invalid view_range {v}; the file has {} lines.", lines.len()));
                }
                (pair.0 as usize, end as usize)
            }
        };
        let mut out = format!("Here's the result of running `cat -n` on {shown}:\n");
        for (i, line) in lines.iter().enumerate().take(end).skip(start - 1) {
            out.push_str(&format!("{:6}\t{line}\n", i + 1));
        }
        Ok(out)
    }

    fn bash(&mut self, args: &Map<String, Value>) -> Result<String, String> {
        if !self.shell.enabled {
            return Err("the bash tool is disabled in this environment.".into());
        }
        let command = args
            .get("command")
            .and_then(Value::as_str)
            .ok_or("missing required parameter `command`")?;
        if command.contains(SHELL_METACHARACTERS) {
            return Err("shell operators are not allowed; run one plain command.".into());
        }
        let words: Vec<&str> = command.split_whitespace().collect();
        let program = *words.first().ok_or("empty command")?;
        if !self.shell.allow.iter().any(|a| a == program) {
            return Err(format!("`{program}` is not allowed. Allowed commands: {}.", self.shell.allow.join(", ")));
        }
        let root = self.dir.path().to_string_lossy().into_owned();
        let argv: Vec<String> = words[1..].iter().map(|w| w.replace(WORKDIR, &root)).collect();
        let mut child = Command::new(program)
            .args(&argv)
            .current_dir(self.dir.path())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("could not run `{program}`: {e}"))?;
        let deadline = Instant::now() + Duration::from_secs(self.shell.timeout_secs);
        loop {
            match child.try_wait().map_err(|e| e.to_string())? {
                Some(_) => break,
                None if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(format!("command timed out after {}s", self.shell.timeout_secs));
                }
                None => std::thread::sleep(Duration::from_millis(10)),
            }
        }
        let mut out = String::new();
        if let Some(mut s) = child.stdout.take() {
            let _ = s.read_to_string(&mut out);
        }
        if let Some(mut s) = child.stderr.take() {
            let _ = s.read_to_string(&mut out);
        }
        Ok(out.replace(&root, WORKDIR))
    }

    /// Unified diff of the working copy against the original tree, files
    /// in path order. Non-UTF-8 files are skipped.
    pub fn diff(&self) -> Result<String, OrchestrateError> {
        let mut paths = tree_files(&self.original)?;
        paths.extend(tree_files(self.dir.path())?);
        let mut out = String::new();
        for rel in paths {
            let old = read_optional(&self.original.join(&rel))?;
            let new = read_optional(&self.dir.path().join(&rel))?;
            if old == new {
                continue;
            }
            let as_text = |b: &Option<Vec<u8>>| match b {
                None => Some(String::new()),
                Some(bytes) => String::from_utf8(bytes.clone()).ok(),
            };
            let (Some(old_text), Some(new_text)) = (as_text(&old), as_text(&new)) else {
                tracing::debug!(path = %rel, "skipping non-UTF-8 file in diff");
                continue;
            };
            let a = if old.is_some() { format!("a/{rel}") } else { "/dev/null".into() };
            let b = if new.is_some() { format!("b/{rel}") } else { "/dev/null".into() };
            out.push_str(&format!("diff --git a/{rel} b/{rel}\n"));
            if old.is_none() {
                out.push_str("new file mode 100644\n");
            } else if new.is_none() {
                out.push_str("deleted file mode 100644\n");
            }
            let diff = TextDiff::from_lines(&old_text, &new_text);
            let body = diff.unified_diff().context_radius(3).header(&a, &b).to_string();
            out.push_str(&body);
        }
        Ok(out)
    }
}
