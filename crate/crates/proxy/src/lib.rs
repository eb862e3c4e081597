//! Lets a client that speaks the messages API (with Read, Edit, Write and
//! Bash tools) drive a model trained on a chat-completions scaffold with
//! `str_replace_editor` and `bash`.
//!
//! Tool calls are renamed and their arguments reshaped on the way
//! through. Paths under the user's working directory are rewritten to the
//! directory the model was trained in, and back again on replies.
//! Streamed deltas are re-framed as messages-API events.

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod fixtures;
pub mod mapping;
pub mod messages;
pub mod paths;
pub mod server;
pub mod stream;
pub mod translate;

pub use mapping::{to_client, to_scaffold, ClientTool, MappingError};
pub use messages::{Content, ContentBlock, Message, MessagesRequest, MessagesResponse, Role};
pub use paths::{PathPolicy, PathPolicyError};
pub use server::{router, serve, ProxyConfig, ProxyError};
pub use stream::{BridgeEvent, SseEncoder, SseFrame, StreamBridge};
pub use translate::{parse_request, MappedCall, ResultTemplates, TranslateError, Translator};
