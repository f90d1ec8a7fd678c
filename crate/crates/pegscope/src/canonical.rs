//! Canonical JSON serialization.
//!
//! Canonical form is the determinism backbone of the store and the tool
//! protocol: UTF-8 JSON with lexicographically sorted object keys, no
//! insignificant whitespace, numbers rendered as their shortest round-trip
//! decimal, no trailing newline.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Serialize a value to canonical bytes.
pub fn to_canonical_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let v = serde_json::to_value(value)?;
    let mut out = Vec::new();
    write_canonical(&v, &mut out);
    Ok(out)
}

pub fn to_canonical_string<T: Serialize>(value: &T) -> Result<String> {
    let bytes = to_canonical_bytes(value)?;
    // write_canonical only emits valid UTF-8
    Ok(String::from_utf8(bytes).expect("canonical bytes are UTF-8"))
}

/// Re-canonicalize a JSON text. Applying this twice is a fixed point.
pub fn canonicalize_text(text: &str) -> Result<String> {
    let v: Value = serde_json::from_str(text)?;
    to_canonical_string(&v)
}

/// Hex SHA-256 digest of a value's canonical bytes.
pub fn content_digest<T: Serialize>(value: &T) -> Result<String> {
    let bytes = to_canonical_bytes(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_canonical(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Null | Value::Bool(_) | Value::Number(_) | Value::String(_) => {
            // serde_json renders numbers via ryu/itoa (shortest round trip)
            // and strings with minimal escaping.
            out.extend_from_slice(serde_json::to_string(value).expect("scalar").as_bytes());
        }
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_canonical(item, out);
            }
            out.push(b']');
        }
        Value::Object(map) => {
            // serde_json's default Map is a BTreeMap, but sort explicitly so
            // canonical form does not depend on feature flags.
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_unstable();
            out.push(b'{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                out.extend_from_slice(
                    serde_json::to_string(key).expect("string key").as_bytes(),
                );
                out.push(b':');
                write_canonical(&map[key.as_str()], out);
            }
            out.push(b'}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_compact() {
        let v = json!({"b": 1, "a": {"z": [1, 2], "y": null}});
        let s = to_canonical_string(&v).unwrap();
        assert_eq!(s, r#"{"a":{"y":null,"z":[1,2]},"b":1}"#);
    }

    #[test]
    fn canonicalize_is_fixed_point() {
        let noisy = "{\n  \"x\": 0.99964500,\n  \"n\": 82190000000\n}";
        let once = canonicalize_text(noisy).unwrap();
        let twice = canonicalize_text(&once).unwrap();
        assert_eq!(once, twice);
        assert!(!once.ends_with('\n'));
    }

    #[test]
    fn digest_stable_across_key_order() {
        let a = json!({"p": 1.0, "q": 2.0});
        let b = json!({"q": 2.0, "p": 1.0});
        assert_eq!(content_digest(&a).unwrap(), content_digest(&b).unwrap());
    }
}
