//! Pulls the JSON payload out of a free-form model response.

use serde_json::Value;

use super::GatewayError;

/// Returns the first JSON object in `text`, or failing that the first JSON
/// array. Fenced code blocks are tried before the raw text.
pub fn extract_json(text: &str) -> Result<Value, GatewayError> {
    for block in fenced_blocks(text) {
        if let Some(v) = first_json(block) {
            return Ok(v);
        }
    }
    first_json(text).ok_or(GatewayError::NoJsonFound)
}

fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let body = &after[body_start..];
        match body.find("```") {
            Some(close) => {
                blocks.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => break,
        }
    }
    blocks
}

fn first_json(text: &str) -> Option<Value> {
    first_starting_with(text, '{').or_else(|| first_starting_with(text, '['))
}

fn first_starting_with(text: &str, open: char) -> Option<Value> {
    text.char_indices().filter(|&(_, c)| c == open).find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(v)) if v.is_object() || v.is_array() => Some(v),
            _ => None,
        }
    })
}
