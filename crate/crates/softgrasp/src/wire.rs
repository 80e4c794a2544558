//! Line-delimited request/response protocol spoken between sensor nodes and
//! the hub. UTF-8, one message per `\n`-terminated line.
//!
//! ```text
//! LATEST  -> SNAP <sensor_id> <seq> <timestamp_ms> <delta:9dp> <contact:0|1> <reference_set:0|1>
//! SETREF  -> OK | ERR not-ready
//! PING    -> PONG <sensor_id>
//! other   -> ERR bad-request
//! ```

use softgrasp_core::SensorSnapshot;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Request {
    Latest,
    SetRef,
    Ping,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Snap(SensorSnapshot),
    Ok,
    Pong(u8),
    Err(ErrorKind),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ErrorKind {
    /// SETREF before any frame was captured.
    NotReady,
    /// Unparseable request line.
    BadRequest,
    /// Any other error string from the peer.
    Other(String),
}

impl ErrorKind {
    fn as_str(&self) -> &str {
        match self {
            ErrorKind::NotReady => "not-ready",
            ErrorKind::BadRequest => "bad-request",
            ErrorKind::Other(s) => s,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed response line: {0:?}")]
    MalformedResponse(String),
}

pub fn parse_request(line: &str) -> Option<Request> {
    match line.trim_end_matches(['\r', '\n']).trim() {
        "LATEST" => Some(Request::Latest),
        "SETREF" => Some(Request::SetRef),
        "PING" => Some(Request::Ping),
        _ => None,
    }
}

pub fn encode_request(request: Request) -> &'static str {
    match request {
        Request::Latest => "LATEST\n",
        Request::SetRef => "SETREF\n",
        Request::Ping => "PING\n",
    }
}

pub fn encode_response(response: &Response) -> String {
    match response {
        Response::Snap(s) => format!(
            "SNAP {} {} {} {:.9} {} {}\n",
            s.sensor_id,
            s.seq,
            s.timestamp_ms,
            s.delta,
            s.contact as u8,
            s.reference_set as u8
        ),
        Response::Ok => "OK\n".to_string(),
        Response::Pong(id) => format!("PONG {id}\n"),
        Response::Err(kind) => format!("ERR {}\n", kind.as_str()),
    }
}

pub fn parse_response(line: &str) -> Result<Response, WireError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let mut parts = line.split_ascii_whitespace();
    let malformed = || WireError::MalformedResponse(line.to_string());
    match parts.next() {
        Some("OK") => Ok(Response::Ok),
        Some("PONG") => {
            let id = parts.next().and_then(|v| v.parse().ok()).ok_or_else(malformed)?;
            Ok(Response::Pong(id))
        }
        Some("ERR") => {
            let kind = match parts.next() {
                Some("not-ready") => ErrorKind::NotReady,
                Some("bad-request") => ErrorKind::BadRequest,
                Some(other) => ErrorKind::Other(other.to_string()),
                None => return Err(malformed()),
            };
            Ok(Response::Err(kind))
        }
        Some("SNAP") => {
            let mut field = || parts.next().ok_or_else(malformed);
            let sensor_id = field()?.parse().map_err(|_| malformed())?;
            let seq = field()?.parse().map_err(|_| malformed())?;
            let timestamp_ms = field()?.parse().map_err(|_| malformed())?;
            let delta: f64 = field()?.parse().map_err(|_| malformed())?;
            let contact = match field()? {
                "0" => false,
                "1" => true,
                _ => return Err(malformed()),
            };
            let reference_set = match field()? {
                "0" => false,
                "1" => true,
                _ => return Err(malformed()),
            };
            if !(0.0..=1.0).contains(&delta) {
                return Err(malformed());
            }
            Ok(Response::Snap(SensorSnapshot {
                sensor_id,
                seq,
                timestamp_ms,
                delta,
                contact,
                reference_set,
            }))
        }
        _ => Err(malformed()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requests_parse() {
        assert_eq!(parse_request("LATEST\n"), Some(Request::Latest));
        assert_eq!(parse_request("SETREF"), Some(Request::SetRef));
        assert_eq!(parse_request("PING\r\n"), Some(Request::Ping));
        assert_eq!(parse_request("latest"), None);
        assert_eq!(parse_request("GETDATA"), None);
        assert_eq!(parse_request(""), None);
    }

    #[test]
    fn snap_roundtrip_preserves_nine_decimals() {
        let snap = SensorSnapshot {
            sensor_id: 3,
            seq: 42,
            timestamp_ms: 12345,
            delta: 0.123456789,
            contact: true,
            reference_set: true,
        };
        let line = encode_response(&Response::Snap(snap));
        assert_eq!(line, "SNAP 3 42 12345 0.123456789 1 1\n");
        match parse_response(&line).unwrap() {
            Response::Snap(back) => {
                assert_eq!(back.sensor_id, 3);
                assert_eq!(back.seq, 42);
                assert!((back.delta - 0.123456789).abs() < 1e-12);
                assert!(back.contact && back.reference_set);
            }
            other => panic!("unexpected response {other:?}"),
        }
    }

    #[test]
    fn error_responses_roundtrip() {
        for kind in [ErrorKind::NotReady, ErrorKind::BadRequest] {
            let line = encode_response(&Response::Err(kind.clone()));
            assert_eq!(parse_response(&line).unwrap(), Response::Err(kind));
        }
    }

    #[test]
    fn malformed_lines_are_rejected() {
        for line in ["SNAP 1 2", "SNAP a b c d e f", "NOPE", "", "SNAP 0 1 2 1.5 0 0"] {
            assert!(parse_response(line).is_err(), "{line:?} should not parse");
        }
    }
}
