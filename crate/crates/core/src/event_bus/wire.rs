use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Face-count notification from the edge node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaceEvent {
    pub faces: u32,
    pub seq: u64,
    pub timestamp_us: u64,
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed event record: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("event record is not valid UTF-8")]
    Utf8,
    #[error("event record must be a JSON object")]
    NotAnObject,
}

/// One event as a single line, including the trailing `\n`.
pub fn encode(event: &FaceEvent) -> String {
    let mut line = serde_json::to_string(event).expect("FaceEvent serializes");
    line.push('\n');
    line
}

/// Parses one record; surrounding whitespace and unknown fields are ignored.
pub fn decode(line: &str) -> Result<FaceEvent, WireError> {
    let value: serde_json::Value = serde_json::from_str(line.trim())?;
    if !value.is_object() {
        return Err(WireError::NotAnObject);
    }
    Ok(serde_json::from_value(value)?)
}

pub fn decode_bytes(line: &[u8]) -> Result<FaceEvent, WireError> {
    decode(std::str::from_utf8(line).map_err(|_| WireError::Utf8)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_documented_record() {
        let e = decode(r#"{"faces":2,"seq":7,"timestamp_us":140000}"#).unwrap();
        assert_eq!(e, FaceEvent { faces: 2, seq: 7, timestamp_us: 140000 });
    }

    #[test]
    fn ignores_unknown_fields() {
        let e = decode(r#"{"faces":1,"seq":1,"timestamp_us":0,"camera":"cam0"}"#).unwrap();
        assert_eq!(e.faces, 1);
    }

    #[test]
    fn rejects_invalid_records() {
        for bad in [
            r#"{"faces":-1,"seq":1,"timestamp_us":0}"#,
            r#"{"faces":1.5,"seq":1,"timestamp_us":0}"#,
            r#"{"faces":1,"seq":1}"#,
            r#"[1,2,3]"#,
            "",
            "faces=2",
        ] {
            assert!(decode(bad).is_err(), "{bad}");
        }
        assert!(matches!(decode_bytes(&[0xff, 0xfe]), Err(WireError::Utf8)));
    }

    #[test]
    fn encoded_record_is_one_line() {
        let line = encode(&FaceEvent { faces: 3, seq: 9, timestamp_us: 12 });
        assert!(line.ends_with('\n'));
        assert_eq!(line.matches('\n').count(), 1);
    }

    proptest! {
        #[test]
        fn round_trip(faces: u32, seq: u64, timestamp_us: u64) {
            let e = FaceEvent { faces, seq, timestamp_us };
            prop_assert_eq!(decode(&encode(&e)).unwrap(), e);
        }
    }
}
