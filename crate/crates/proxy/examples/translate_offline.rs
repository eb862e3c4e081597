//! Shows what the proxy sends upstream and what the client gets back,
//! without any network traffic.
//!
//!     cargo run -p softverify-proxy --example translate_offline

use serde_json::json;
use softverify::chat::{ChatChunk, ChatMessage, ChatResponse, ChatToolCall, ChunkChoice, Delta};
use softverify_proxy::{parse_request, PathPolicy, ResultTemplates, SseEncoder, StreamBridge, Translator};

fn main() {
    let translator = Translator {
        policy: PathPolicy::new("/testbed", "/home/me/project").expect("valid roots"),
        templates: ResultTemplates::default(),
        model_id: "my-finetuned-model".into(),
        drop_unknown_tools: false,
        advertise_submit: true,
    };

    let body = json!({
        "model": "client-side-name",
        "max_tokens": 512,
        "system": "You are working in /home/me/project.",
        "tools": [
            {"name": "Read", "input_schema": {"type": "object"}},
            {"name": "Edit", "input_schema": {"type": "object"}},
            {"name": "Bash", "input_schema": {"type": "object"}}
        ],
        "messages": [
            {"role": "user", "content": "The parser in /home/me/project/src/parse.py drops blank lines."},
            {"role": "assistant", "content": [
                {"type": "tool_use", "id": "toolu_1", "name": "Read",
                 "input": {"file_path": "/home/me/project/src/parse.py", "offset": 10, "limit": 20}}
            ]},
            {"role": "user", "content": [
                {"type": "tool_result", "tool_use_id": "toolu_1", "content": "10\tdef parse(text):\n11\t    ..."}
            ]}
        ]
    });
    let inbound = parse_request(body.to_string().as_bytes()).expect("schema-valid request");
    let outbound = translator.translate_request(&inbound).expect("translatable");
    println!("== upstream request ==\n{}\n", serde_json::to_string_pretty(&outbound).unwrap());

    let mut reply = ChatMessage::text("assistant", "Blank lines are filtered in /testbed/src/parse.py.");
    reply.tool_calls.push(ChatToolCall::new(
        "call_7",
        "str_replace_editor",
        json!({"command": "str_replace", "path": "/testbed/src/parse.py",
               "old_str": "if line.strip():", "new_str": "if True:"})
        .to_string(),
    ));
    let response = translator.translate_response(&ChatResponse::from_message(reply, "tool_calls"), &inbound.model);
    println!("== client response ==\n{}\n", serde_json::to_string_pretty(&response).unwrap());

    println!("== streamed events ==");
    let deltas = ["Looking at /test", "bed/src/", "parse.py now."];
    let mut bridge = StreamBridge::new(&translator);
    let mut encoder = SseEncoder::new("demo", &inbound.model);
    print!("{}", encoder.start().to_wire());
    for d in deltas {
        let chunk = ChatChunk {
            choices: vec![ChunkChoice {
                delta: Delta {
                    content: Some(d.into()),
                    ..Delta::default()
                },
                ..ChunkChoice::default()
            }],
            ..ChatChunk::default()
        };
        for event in bridge.push(&chunk) {
            for frame in encoder.encode(&event) {
                print!("{}", frame.to_wire());
            }
        }
    }
    for event in bridge.finish() {
        for frame in encoder.encode(&event) {
            print!("{}", frame.to_wire());
        }
    }
}
