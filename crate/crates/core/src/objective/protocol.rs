//! The newline-delimited JSON evaluation protocol.
//!
//! An evaluator child announces itself with
//! `{"protocol":"optba-eval","version":1}` on startup, then answers requests
//! `{"id":<uint>,"params":{<name>:<int>,...}}` with either
//! `{"id":<uint>,"fitness":<finite number>}` or `{"id":<uint>,"error":<string>}`.
//! One JSON object per line, `\n` terminated. Responses may arrive in any order;
//! they are matched to requests by `id`. Diagnostics belong on stderr.

use std::io::{self, BufRead, Write};

use serde_json::{Map, Value};

pub const PROTOCOL_NAME: &str = "optba-eval";
pub const PROTOCOL_VERSION: u64 = 1;

pub fn handshake_line() -> String {
    format!(r#"{{"protocol":"{PROTOCOL_NAME}","version":{PROTOCOL_VERSION}}}"#)
}

pub fn check_handshake(line: &str) -> Result<(), String> {
    let value: Value = serde_json::from_str(line.trim_end())
        .map_err(|e| format!("handshake is not JSON ({e}): {line:?}"))?;
    match (value.get("protocol").and_then(Value::as_str), value.get("version").and_then(Value::as_u64)) {
        (Some(PROTOCOL_NAME), Some(PROTOCOL_VERSION)) => Ok(()),
        _ => Err(format!("unexpected handshake {line:?}")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalRequest {
    pub id: u64,
    /// Named coordinates in domain order.
    pub params: Vec<(String, i64)>,
}

impl EvalRequest {
    /// Serialises without the trailing newline.
    pub fn to_line(&self) -> String {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(name, v)| format!("{}:{v}", Value::String(name.clone())))
            .collect();
        format!(r#"{{"id":{},"params":{{{}}}}}"#, self.id, params.join(","))
    }

    pub fn parse(line: &str) -> Result<Self, String> {
        let value: Value = serde_json::from_str(line.trim_end()).map_err(|e| e.to_string())?;
        let id = value.get("id").and_then(Value::as_u64).ok_or("request without integer id")?;
        let params = value
            .get("params")
            .and_then(Value::as_object)
            .ok_or("request without params object")?
            .iter()
            .map(|(k, v)| {
                v.as_i64()
                    .map(|x| (k.clone(), x))
                    .ok_or_else(|| format!("param {k} is not an integer"))
            })
            .collect::<Result<_, _>>()?;
        Ok(EvalRequest { id, params })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResponse {
    pub id: u64,
    pub outcome: Result<f64, String>,
}

impl EvalResponse {
    pub fn to_line(&self) -> String {
        let mut obj = Map::new();
        obj.insert("id".into(), self.id.into());
        match &self.outcome {
            Ok(f) => obj.insert("fitness".into(), serde_json::Number::from_f64(*f).map_or(Value::Null, Value::Number)),
            Err(e) => obj.insert("error".into(), Value::String(e.clone())),
        };
        Value::Object(obj).to_string()
    }
}

/// A response line that breaks the protocol. `id` is set when the line could still
/// be attributed to a request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub id: Option<u64>,
    pub message: String,
}

pub fn parse_response(line: &str) -> Result<EvalResponse, Violation> {
    let bad = |id, message: String| Violation { id, message };
    let value: Value = serde_json::from_str(line.trim_end())
        .map_err(|e| bad(None, format!("malformed response line {line:?}: {e}")))?;
    let id = value
        .get("id")
        .and_then(Value::as_u64)
        .ok_or_else(|| bad(None, format!("response without integer id: {line:?}")))?;
    if let Some(fitness) = value.get("fitness") {
        return match fitness.as_f64() {
            Some(f) if f.is_finite() && fitness.is_number() => Ok(EvalResponse { id, outcome: Ok(f) }),
            _ => Err(bad(Some(id), format!("fitness is not a finite number: {fitness}"))),
        };
    }
    match value.get("error") {
        Some(Value::String(msg)) => Ok(EvalResponse { id, outcome: Err(msg.clone()) }),
        _ => Err(bad(Some(id), format!("response has neither fitness nor error: {line:?}"))),
    }
}

/// Misbehaviours the reference evaluator can be told to exhibit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ServeFault {
    #[default]
    None,
    /// Replies `"fitness":"NaN"`.
    NanFitness,
    /// Replies with a line that is not JSON.
    Malformed,
    /// Replies with an id nobody asked for.
    WrongId,
    /// Answers requests in pairs, second one first.
    Shuffle,
    /// Reads requests and never answers.
    Hang,
    /// Exits without answering once this many requests have been read.
    ExitAfter(usize),
    /// Announces the wrong protocol name.
    BadHandshake,
}

/// Runs an evaluator child loop until `input` closes.
pub fn serve<R, W, F>(input: R, mut output: W, mut evaluate: F, fault: ServeFault) -> io::Result<()>
where
    R: BufRead,
    W: Write,
    F: FnMut(&EvalRequest) -> Result<f64, String>,
{
    if fault == ServeFault::BadHandshake {
        writeln!(output, r#"{{"protocol":"something-else","version":1}}"#)?;
    } else {
        writeln!(output, "{}", handshake_line())?;
    }
    output.flush()?;

    let mut held: Option<EvalResponse> = None;
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let ServeFault::ExitAfter(limit) = fault {
            if n + 1 >= limit {
                return Ok(());
            }
        }
        let response = match EvalRequest::parse(&line) {
            Ok(req) => EvalResponse { id: req.id, outcome: evaluate(&req) },
            Err(e) => {
                eprintln!("bad request: {e}");
                continue;
            }
        };
        match fault {
            ServeFault::Hang => continue,
            ServeFault::NanFitness => writeln!(output, r#"{{"id":{},"fitness":"NaN"}}"#, response.id)?,
            ServeFault::Malformed => writeln!(output, "fitness for {} coming right up", response.id)?,
            ServeFault::WrongId => writeln!(output, r#"{{"id":{},"fitness":0.5}}"#, response.id + 1_000_000)?,
            ServeFault::Shuffle => match held.take() {
                None => {
                    held = Some(response);
                    continue;
                }
                Some(first) => {
                    writeln!(output, "{}", response.to_line())?;
                    writeln!(output, "{}", first.to_line())?;
                }
            },
            _ => writeln!(output, "{}", response.to_line())?,
        }
        output.flush()?;
    }
    if let Some(last) = held {
        writeln!(output, "{}", last.to_line())?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_line_is_bit_exact() {
        let req = EvalRequest { id: 1, params: vec![("epochs".into(), 49), ("units".into(), 108)] };
        assert_eq!(req.to_line(), r#"{"id":1,"params":{"epochs":49,"units":108}}"#);
        assert_eq!(EvalRequest::parse(&req.to_line()).unwrap(), req);
    }

    #[test]
    fn response_lines() {
        let ok = EvalResponse { id: 1, outcome: Ok(0.9963) };
        assert_eq!(ok.to_line(), r#"{"id":1,"fitness":0.9963}"#);
        assert_eq!(parse_response(&ok.to_line()).unwrap(), ok);
        let err = EvalResponse { id: 2, outcome: Err("oom".into()) };
        assert_eq!(err.to_line(), r#"{"id":2,"error":"oom"}"#);
        assert_eq!(parse_response(&err.to_line()).unwrap(), err);
    }

    #[test]
    fn violations() {
        let nan = parse_response(r#"{"id":1,"fitness":"NaN"}"#).unwrap_err();
        assert_eq!(nan.id, Some(1));
        assert_eq!(parse_response("hello").unwrap_err().id, None);
        assert_eq!(parse_response(r#"{"fitness":0.5}"#).unwrap_err().id, None);
        assert_eq!(parse_response(r#"{"id":4}"#).unwrap_err().id, Some(4));
        assert!(parse_response(r#"{"id":4,"fitness":1e999}"#).is_err());
    }

    #[test]
    fn handshake() {
        assert!(check_handshake(&handshake_line()).is_ok());
        assert!(check_handshake(r#"{"protocol":"optba-eval","version":2}"#).is_err());
        assert!(check_handshake("ready").is_err());
    }

    #[test]
    fn serve_echoes_and_shuffles() {
        let input = "{\"id\":1,\"params\":{\"x\":2}}\n{\"id\":2,\"params\":{\"x\":3}}\n";
        let mut out = Vec::new();
        serve(input.as_bytes(), &mut out, |r| Ok(r.params[0].1 as f64), ServeFault::None).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines, vec![handshake_line().as_str(), r#"{"id":1,"fitness":2.0}"#, r#"{"id":2,"fitness":3.0}"#]);

        let mut out = Vec::new();
        serve(input.as_bytes(), &mut out, |r| Ok(r.params[0].1 as f64), ServeFault::Shuffle).unwrap();
        let text = String::from_utf8(out).unwrap();
        let ids: Vec<u64> = text.lines().skip(1).map(|l| parse_response(l).unwrap().id).collect();
        assert_eq!(ids, vec![2, 1]);
    }
}
