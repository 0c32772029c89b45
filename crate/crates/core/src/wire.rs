//! JSON wire protocol spoken by commitment servers.
//!
//! Requests are canonical JSON objects carrying the protocol version, scheme
//! tag, server index and an operation; responses carry bundles as
//! lowercase-hex strings of the binary bundle layouts, so hashes and
//! certificates stay bit-exact regardless of JSON formatting.

use serde::{Deserialize, Serialize};

use crate::params::SchemeTag;

pub const WIRE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub v: u32,
    pub scheme: SchemeTag,
    pub server: u16,
    #[serde(flatten)]
    pub op: WireOp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum WireOp {
    Get { j: u64 },
    Batch { lo: u64, hi: u64 },
    Status,
}

impl WireRequest {
    pub fn get(scheme: SchemeTag, server: u16, j: u64) -> Self {
        WireRequest { v: WIRE_VERSION, scheme, server, op: WireOp::Get { j } }
    }

    pub fn batch(scheme: SchemeTag, server: u16, lo: u64, hi: u64) -> Self {
        WireRequest { v: WIRE_VERSION, scheme, server, op: WireOp::Batch { lo, hi } }
    }

    pub fn status(scheme: SchemeTag, server: u16) -> Self {
        WireRequest { v: WIRE_VERSION, scheme, server, op: WireOp::Status }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct WireResponse {
    pub v: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bundles: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub status: Option<StatusBody>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<WireFault>,
}

impl WireResponse {
    pub fn bundles(raw: Vec<Vec<u8>>) -> Self {
        WireResponse {
            v: WIRE_VERSION,
            bundles: Some(raw.iter().map(hex::encode).collect()),
            ..Default::default()
        }
    }

    pub fn status(body: StatusBody) -> Self {
        WireResponse { v: WIRE_VERSION, status: Some(body), ..Default::default() }
    }

    pub fn fault(code: impl Into<String>, message: impl Into<String>) -> Self {
        WireResponse {
            v: WIRE_VERSION,
            error: Some(WireFault { code: code.into(), message: message.into() }),
            ..Default::default()
        }
    }

    /// Decode the hex bundle strings back to raw bytes.
    pub fn raw_bundles(&self) -> Result<Vec<Vec<u8>>, hex::FromHexError> {
        self.bundles.as_deref().unwrap_or_default().iter().map(hex::decode).collect()
    }
}

/// Machine-readable error payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireFault {
    pub code: String,
    pub message: String,
}

/// Answer to the `status` operation. Reports readiness and cache shape
/// without exposing any secret bytes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusBody {
    pub ready: bool,
    pub scheme: SchemeTag,
    pub server: u16,
    pub max_epochs: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub precomputed_lo: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub precomputed_hi: Option<u64>,
    pub cache: CacheStats,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CacheStats {
    pub bundles: u64,
    pub bytes: u64,
    pub budget: u64,
    pub hits: u64,
    pub misses: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_json_shape_matches_protocol() {
        let get = WireRequest::get(SchemeTag::Lrsha, 2, 5);
        assert_eq!(
            serde_json::to_string(&get).unwrap(),
            r#"{"v":1,"scheme":"lrsha","server":2,"op":"get","j":5}"#
        );
        let batch = WireRequest::batch(SchemeTag::Flrsha, 1, 1, 64);
        assert_eq!(
            serde_json::to_string(&batch).unwrap(),
            r#"{"v":1,"scheme":"flrsha","server":1,"op":"batch","lo":1,"hi":64}"#
        );
        let status = WireRequest::status(SchemeTag::Lrsha, 3);
        assert_eq!(
            serde_json::to_string(&status).unwrap(),
            r#"{"v":1,"scheme":"lrsha","server":3,"op":"status"}"#
        );
    }

    #[test]
    fn request_json_round_trips() {
        for req in [
            WireRequest::get(SchemeTag::Lrsha, 1, 9),
            WireRequest::batch(SchemeTag::Flrsha, 2, 3, 4),
            WireRequest::status(SchemeTag::Flrsha, 3),
        ] {
            let json = serde_json::to_string(&req).unwrap();
            assert_eq!(serde_json::from_str::<WireRequest>(&json).unwrap(), req);
        }
    }

    #[test]
    fn bundle_hex_round_trips_byte_exactly() {
        let raw = vec![vec![0u8, 1, 254, 255], vec![42; 107]];
        let resp = WireResponse::bundles(raw.clone());
        let json = serde_json::to_string(&resp).unwrap();
        assert!(json.starts_with(r#"{"v":1,"bundles":["#));
        let parsed: WireResponse = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.raw_bundles().unwrap(), raw);
    }

    #[test]
    fn fault_response_shape() {
        let resp = WireResponse::fault("EpochOutOfRange", "epoch 0 outside [1, 8]");
        let json = serde_json::to_string(&resp).unwrap();
        assert_eq!(
            json,
            r#"{"v":1,"error":{"code":"EpochOutOfRange","message":"epoch 0 outside [1, 8]"}}"#
        );
    }
}
