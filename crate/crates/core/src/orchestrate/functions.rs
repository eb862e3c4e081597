//! Lightweight syntactic scan for Python function definitions.
//!
//! Reports module-level functions and methods of (possibly nested)
//! classes. Functions defined inside other functions are skipped, as is
//! anything inside string literals or comments.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::OrchestrateError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FunctionRef {
    /// Path relative to the codebase root, `/`-separated.
    pub file: String,
    /// Qualified name: enclosing classes joined by `.`.
    pub name: String,
    /// 1-based line of the `def`.
    pub line: usize,
}

impl FunctionRef {
    /// Bare function name without enclosing classes.
    pub fn short_name(&self) -> &str {
        self.name.rsplit('.').next().unwrap_or(&self.name)
    }

    pub fn key(&self) -> String {
        format!("{}::{}@{}", self.file, self.name, self.line)
    }
}

const SKIP_DIRS: &[&str] = &["__pycache__", "node_modules", "venv", "site-packages"];

pub(crate) fn is_hidden_or_skipped(name: &str) -> bool {
    name.starts_with('.') || SKIP_DIRS.contains(&name)
}

pub fn enumerate_functions(root: &Path) -> Result<Vec<FunctionRef>, OrchestrateError> {
    let meta = fs::metadata(root).map_err(|e| OrchestrateError::io(root, e))?;
    if !meta.is_dir() {
        return Err(OrchestrateError::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "codebase root is not a directory"),
        ));
    }
    let mut out = Vec::new();
    let walker = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !is_hidden_or_skipped(&e.file_name().to_string_lossy()));
    for entry in walker {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            OrchestrateError::io(&path, e.into())
        })?;
        if !entry.file_type().is_file() || entry.path().extension().is_none_or(|x| x != "py") {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields paths under root")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let bytes = fs::read(entry.path()).map_err(|e| OrchestrateError::io(entry.path(), e))?;
        let source = String::from_utf8_lossy(&bytes);
        out.extend(scan_python(&source).into_iter().map(|(name, line)| FunctionRef {
            file: rel.clone(),
            name,
            line,
        }));
    }
    out.sort_by(|a, b| (&a.file, a.line).cmp(&(&b.file, b.line)));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Lex {
    Code,
    Str { quote: char, triple: bool },
}

/// Marks which lines begin a logical statement: outside strings and
/// outside open brackets.
fn statement_starts(source: &str) -> Vec<bool> {
    let mut starts = Vec::new();
    let mut state = Lex::Code;
    let mut depth: i32 = 0;
    let mut continued = false;
    for line in source.split('\n') {
        starts.push(state == Lex::Code && depth == 0 && !continued);
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        continued = false;
        while i < chars.len() {
            let c = chars[i];
            match state {
                Lex::Code => match c {
                    '#' => break,
                    '\'' | '"' => {
                        let triple = i + 2 < chars.len() && chars[i + 1] == c && chars[i + 2] == c;
                        state = Lex::Str { quote: c, triple };
                        i += if triple { 3 } else { 1 };
                        continue;
                    }
                    '(' | '[' | '{' => depth += 1,
                    ')' | ']' | '}' => depth = (depth - 1).max(0),
                    '\\' if i + 1 == chars.len() => continued = true,
                    _ => {}
                },
                Lex::Str { quote, triple } => {
                    if c == '\\' {
                        i += 2;
                        continue;
                    }
                    if c == quote {
                        if !triple {
                            state = Lex::Code;
                        } else if i + 2 < chars.len() && chars[i + 1] == quote && chars[i + 2] == quote {
                            state = Lex::Code;
                            i += 3;
                            continue;
                        }
                    }
                }
            }
            i += 1;
        }
        if let Lex::Str { triple: false, .. } = state {
            // unterminated single-quoted string ends at the newline
            state = Lex::Code;
        }
    }
    starts
}

fn indent_width(line: &str) -> usize {
    let mut col = 0;
    for c in line.chars() {
        match c {
            ' ' => col += 1,
            '\t' => col = (col / 8 + 1) * 8,
            _ => break,
        }
    }
    col
}

fn ident_after<'a>(rest: &'a str, keyword: &str) -> Option<&'a str> {
    let rest = rest.strip_prefix(keyword)?;
    if !rest.starts_with(|c: char| c.is_whitespace()) {
        return None;
    }
    let rest = rest.trim_start();
    let end = rest
        .find(|c: char| !(c.is_alphanumeric() || c == '_'))
        .unwrap_or(rest.len());
    (end > 0).then(|| &rest[..end])
}

enum Block {
    Class(String),
    Def,
}

/// Returns (qualified name, 1-based line) for each reportable definition.
pub fn scan_python(source: &str) -> Vec<(String, usize)> {
    let starts = statement_starts(source);
    let mut stack: Vec<(usize, Block)> = Vec::new();
    let mut out = Vec::new();
    for (idx, line) in source.split('\n').enumerate() {
        if !starts[idx] {
            continue;
        }
        let body = line.trim_start();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let indent = indent_width(line);
        while stack.last().is_some_and(|(i, _)| *i >= indent) {
            stack.pop();
        }
        let def_body = body
            .strip_prefix("async")
            .filter(|r| r.starts_with(char::is_whitespace))
            .map(str::trim_start)
            .unwrap_or(body);
        if let Some(name) = ident_after(def_body, "def") {
            let mut classes = Vec::new();
            let mut inside_def = false;
            for (_, b) in &stack {
                match b {
                    Block::Class(n) => classes.push(n.as_str()),
                    Block::Def => inside_def = true,
                }
            }
            if !inside_def {
                classes.push(name);
                out.push((classes.join("."), idx + 1));
            }
            stack.push((indent, Block::Def));
        } else if let Some(name) = ident_after(body, "class") {
            stack.push((indent, Block::Class(name.to_string())));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_functions() {
        let src = "def a():\n    pass\n\ndef b(x):\n    return x\n";
        assert_eq!(scan_python(src), vec![("a".into(), 1), ("b".into(), 4)]);
    }

    #[test]
    fn nested_decorated_async_fixture() {
        let src = r#"import functools

@functools.lru_cache(
    maxsize=None,
)
def cached(n):
    def helper(k):  # nested: skipped
        return k
    return helper(n)

class Parser:
    """Docstring mentioning
    def not_a_function():
    """

    @property
    def name(self):
        return "x"

    async def fetch(self, url):
        text = '''
def fake():
'''
        return text

    class Inner:
        def deep(self): pass

async def main(
    argv,
):
    pass

x = "def inline(): pass"
def  spaced (): pass
"#;
        let got = scan_python(src);
        let expected: Vec<(String, usize)> = vec![
            ("cached".into(), 6),
            ("Parser.name".into(), 17),
            ("Parser.fetch".into(), 20),
            ("Parser.Inner.deep".into(), 27),
            ("main".into(), 29),
            ("spaced".into(), 35),
        ];
        assert_eq!(got, expected);
    }

    #[test]
    fn class_inside_function_is_skipped() {
        let src = "def outer():\n    class Local:\n        def m(self): pass\n    return Local\n";
        assert_eq!(scan_python(src), vec![("outer".into(), 1)]);
    }

    #[test]
    fn empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        assert!(enumerate_functions(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn walks_tree_in_path_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("pkg")).unwrap();
        fs::create_dir_all(dir.path().join(".git")).unwrap();
        fs::write(dir.path().join("pkg/b.py"), "def two(): pass\ndef one(): pass\n").unwrap();
        fs::write(dir.path().join("a.py"), "def zed(): pass\n").unwrap();
        fs::write(dir.path().join(".git/x.py"), "def hidden(): pass\n").unwrap();
        fs::write(dir.path().join("notes.txt"), "def nope(): pass\n").unwrap();
        let refs = enumerate_functions(dir.path()).unwrap();
        let keys: Vec<_> = refs.iter().map(FunctionRef::key).collect();
        assert_eq!(keys, ["a.py::zed@1", "pkg/b.py::two@1", "pkg/b.py::one@2"]);
        assert!(enumerate_functions(&dir.path().join("missing")).is_err());
    }
}
