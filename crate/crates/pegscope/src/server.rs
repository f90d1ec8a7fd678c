//! JSON-RPC 2.0 server over newline-delimited JSON.
//!
//! One request or response object per line; responses are emitted in canonical
//! form so scripted sessions replay byte-identically. The same framing works
//! over stdio or any other stream pair.

use std::io::{BufRead, Write};

use serde_json::{json, Value};

use crate::canonical;
use crate::error::Result;
use crate::tools::{descriptors, ToolRegistry};

const PARSE_ERROR: i64 = -32700;
const INVALID_REQUEST: i64 = -32600;
const METHOD_NOT_FOUND: i64 = -32601;
const INVALID_PARAMS: i64 = -32602;

fn error_response(id: Value, code: i64, message: &str) -> Value {
    json!({
        "jsonrpc": "2.0",
        "id": id,
        "error": {"code": code, "message": message}
    })
}

/// Handle one raw request line, producing one canonical response line.
pub fn handle_line(registry: &ToolRegistry<'_>, line: &str) -> String {
    let response = handle_request(registry, line);
    canonical::to_canonical_string(&response).expect("responses are plain JSON values")
}

fn handle_request(registry: &ToolRegistry<'_>, line: &str) -> Value {
    let request: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return error_response(Value::Null, PARSE_ERROR, &format!("parse error: {e}")),
    };
    let id = request.get("id").cloned().unwrap_or(Value::Null);
    if request.get("jsonrpc").and_then(Value::as_str) != Some("2.0") {
        return error_response(id, INVALID_REQUEST, "missing or invalid jsonrpc version");
    }
    let Some(method) = request.get("method").and_then(Value::as_str) else {
        return error_response(id, INVALID_REQUEST, "missing method");
    };

    match method {
        "tools/list" => json!({
            "jsonrpc": "2.0",
            "id": id,
            "result": {"tools": descriptors()}
        }),
        "tools/call" => {
            let params = request.get("params").cloned().unwrap_or(Value::Null);
            let Some(name) = params.get("name").and_then(Value::as_str) else {
                return error_response(id, INVALID_PARAMS, "missing tool name");
            };
            let arguments = params.get("arguments").cloned().unwrap_or(json!({}));
            match registry.call(name, &arguments) {
                Ok(result) => json!({
                    "jsonrpc": "2.0",
                    "id": id,
                    "result": result
                }),
                Err(invalid) => error_response(id, INVALID_PARAMS, &invalid.0),
            }
        }
        other => error_response(id, METHOD_NOT_FOUND, &format!("unknown method `{other}`")),
    }
}

/// Run the request loop until the input stream closes.
pub fn serve(
    mut reader: impl BufRead,
    mut writer: impl Write,
    registry: &ToolRegistry<'_>,
) -> Result<()> {
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() {
            continue;
        }
        let response = handle_line(registry, trimmed);
        writer.write_all(response.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
}
