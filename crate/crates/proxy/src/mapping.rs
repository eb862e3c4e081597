//! Client tools (Read, Edit, Write, Bash) to the scaffold tools the model
//! was trained with (`str_replace_editor`, `bash`) and back.

use serde_json::{json, Map, Value};
use softverify::chat::ToolSpec;
use thiserror::Error;

pub const CLIENT_TOOLS: [&str; 4] = ["Read", "Edit", "Write", "Bash"];

pub const EDITOR: &str = "str_replace_editor";
pub const BASH: &str = "bash";
pub const SUBMIT: &str = "submit";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClientTool {
    Read,
    Edit,
    Write,
    Bash,
}

impl ClientTool {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "Read" => Self::Read,
            "Edit" => Self::Edit,
            "Write" => Self::Write,
            "Bash" => Self::Bash,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Read => "Read",
            Self::Edit => "Edit",
            Self::Write => "Write",
            Self::Bash => "Bash",
        }
    }

    pub fn scaffold_tool(self) -> &'static str {
        match self {
            Self::Bash => BASH,
            _ => EDITOR,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MappingError {
    #[error("unknown tool `{name}`; known tools: {}", CLIENT_TOOLS.join(", "))]
    UnknownClientTool { name: String },
    #[error("tool `{tool}` arguments: {reason}")]
    BadArguments { tool: String, reason: String },
    #[error("scaffold call `{name}` has no client equivalent")]
    Unmappable { name: String },
}

fn bad(tool: &str, reason: impl Into<String>) -> MappingError {
    MappingError::BadArguments {
        tool: tool.into(),
        reason: reason.into(),
    }
}

fn obj<'a>(tool: &str, v: &'a Value) -> Result<&'a Map<String, Value>, MappingError> {
    v.as_object().ok_or_else(|| bad(tool, "expected a JSON object"))
}

fn str_field(tool: &str, o: &Map<String, Value>, key: &str) -> Result<String, MappingError> {
    o.get(key)
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| bad(tool, format!("missing string field `{key}`")))
}

fn int_field(tool: &str, o: &Map<String, Value>, key: &str) -> Result<Option<i64>, MappingError> {
    match o.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v.as_i64().map(Some).ok_or_else(|| bad(tool, format!("`{key}` must be an integer"))),
    }
}

/// Client call → (scaffold tool name, scaffold arguments).
pub fn to_scaffold(name: &str, input: &Value) -> Result<(&'static str, Value), MappingError> {
    let tool = ClientTool::parse(name).ok_or_else(|| MappingError::UnknownClientTool { name: name.into() })?;
    let o = obj(name, input)?;
    let args = match tool {
        ClientTool::Read => {
            let path = str_field(name, o, "file_path")?;
            let offset = int_field(name, o, "offset")?;
            let limit = int_field(name, o, "limit")?;
            let range = match (offset, limit) {
                (None, None) => None,
                (Some(a), None) => Some([a, -1]),
                (a, Some(n)) => {
                    let a = a.unwrap_or(1);
                    Some([a, a + n - 1])
                }
            };
            let mut m = json!({"command": "view", "path": path});
            if let Some(r) = range {
                m["view_range"] = json!(r);
            }
            m
        }
        ClientTool::Edit => json!({
            "command": "str_replace",
            "path": str_field(name, o, "file_path")?,
            "old_str": str_field(name, o, "old_string")?,
            "new_str": str_field(name, o, "new_string")?,
        }),
        ClientTool::Write => json!({
            "command": "create",
            "path": str_field(name, o, "file_path")?,
            "file_text": str_field(name, o, "content")?,
        }),
        ClientTool::Bash => json!({"command": str_field(name, o, "command")?}),
    };
    Ok((tool.scaffold_tool(), args))
}

/// Scaffold call → (client tool, client arguments). Exact inverse of
/// [`to_scaffold`] on its image.
pub fn to_client(name: &str, args: &Value) -> Result<(ClientTool, Value), MappingError> {
    let o = obj(name, args)?;
    match name {
        BASH => Ok((ClientTool::Bash, json!({"command": str_field(name, o, "command")?}))),
        EDITOR => {
            let command = str_field(name, o, "command")?;
            let path = str_field(name, o, "path")?;
            match command.as_str() {
                "view" => {
                    let mut m = json!({"file_path": path});
                    if let Some(r) = o.get("view_range").filter(|v| !v.is_null()) {
                        let pair = r
                            .as_array()
                            .filter(|a| a.len() == 2)
                            .and_then(|a| Some((a[0].as_i64()?, a[1].as_i64()?)))
                            .ok_or_else(|| bad(name, "`view_range` must be two integers"))?;
                        match pair {
                            (a, -1) => m["offset"] = json!(a),
                            (a, b) if b >= a => {
                                m["offset"] = json!(a);
                                m["limit"] = json!(b - a + 1);
                            }
                            _ => return Err(bad(name, "`view_range` end precedes start")),
                        }
                    }
                    Ok((ClientTool::Read, m))
                }
                "str_replace" => Ok((
                    ClientTool::Edit,
                    json!({
                        "file_path": path,
                        "old_string": str_field(name, o, "old_str")?,
                        "new_string": str_field(name, o, "new_str")?,
                    }),
                )),
                "create" => Ok((
                    ClientTool::Write,
                    json!({"file_path": path, "content": str_field(name, o, "file_text")?}),
                )),
                _ => Err(MappingError::Unmappable {
                    name: format!("{EDITOR}.{command}"),
                }),
            }
        }
        _ => Err(MappingError::Unmappable { name: name.into() }),
    }
}

/// Scaffold tool definitions, in the shape used at training time.
pub fn scaffold_specs(include_bash: bool, include_editor: bool, include_submit: bool) -> Vec<ToolSpec> {
    let mut out = Vec::new();
    if include_editor {
        out.push(ToolSpec::function(
            EDITOR,
            "Custom editing tool for viewing, creating and editing files",
            json!({
                "type": "object",
                "properties": {
                    "command": {"type": "string", "enum": ["view", "create", "str_replace"]},
                    "path": {"type": "string"},
                    "file_text": {"type": "string"},
                    "old_str": {"type": "string"},
                    "new_str": {"type": "string"},
                    "view_range": {"type": "array", "items": {"type": "integer"}}
                },
                "required": ["command", "path"]
            }),
        ));
    }
    if include_bash {
        out.push(ToolSpec::function(
            BASH,
            "Run a shell command",
            json!({"type": "object", "properties": {"command": {"type": "string"}}, "required": ["command"]}),
        ));
    }
    if include_submit {
        out.push(ToolSpec::function(
            SUBMIT,
            "Finish the task",
            json!({"type": "object", "properties": {}}),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn read_ranges_round_trip() {
        for input in [
            json!({"file_path": "/a"}),
            json!({"file_path": "/a", "offset": 10}),
            json!({"file_path": "/a", "offset": 10, "limit": 5}),
        ] {
            let (tool, args) = to_scaffold("Read", &input).unwrap();
            assert_eq!(tool, EDITOR);
            let (back, inv) = to_client(tool, &args).unwrap();
            assert_eq!(back, ClientTool::Read);
            assert_eq!(inv, input);
        }
        let (_, a) = to_scaffold("Read", &json!({"file_path": "/a", "limit": 5})).unwrap();
        assert_eq!(a["view_range"], json!([1, 5]));
    }

    #[test]
    fn unknown_and_unmappable() {
        let e = to_scaffold("Glob", &json!({})).unwrap_err();
        assert!(e.to_string().contains("Read, Edit, Write, Bash"));
        assert!(matches!(
            to_client(EDITOR, &json!({"command": "undo_edit", "path": "/a"})),
            Err(MappingError::Unmappable { .. })
        ));
        assert!(matches!(to_client("python", &json!({})), Err(MappingError::Unmappable { .. })));
        assert!(matches!(to_scaffold("Edit", &json!({"file_path": "/a"})), Err(MappingError::BadArguments { .. })));
    }
}
