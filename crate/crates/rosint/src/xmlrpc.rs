//! XML-RPC value model, serializer, and parser for the subset the ROS master
//! API speaks: i4/int, boolean, string, double, array, struct.
//!
//! Serialized call documents target bit-level acceptance by a stock ROS
//! master; the parser additionally tolerates the usual server-side variants
//! (bare text inside `<value>`, `<int>` vs `<i4>`, self-closed tags,
//! interleaved whitespace).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RpcError {
    #[error("malformed XML-RPC document: {0}")]
    Malformed(String),
    #[error("document nests deeper than {0} levels")]
    TooDeep(usize),
}

const MAX_DEPTH: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum XmlRpcValue {
    Int(i32),
    Bool(bool),
    String(String),
    Double(f64),
    Array(Vec<XmlRpcValue>),
    Struct(BTreeMap<String, XmlRpcValue>),
}

impl XmlRpcValue {
    pub fn string(s: impl Into<String>) -> Self {
        XmlRpcValue::String(s.into())
    }

    pub fn array(items: impl IntoIterator<Item = XmlRpcValue>) -> Self {
        XmlRpcValue::Array(items.into_iter().collect())
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            XmlRpcValue::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_i32(&self) -> Option<i32> {
        match self {
            XmlRpcValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&[XmlRpcValue]> {
        match self {
            XmlRpcValue::Array(items) => Some(items),
            _ => None,
        }
    }

    /// Human-oriented rendering used in reports and warnings.
    pub fn display_string(&self) -> String {
        match self {
            XmlRpcValue::Int(i) => i.to_string(),
            XmlRpcValue::Bool(b) => b.to_string(),
            XmlRpcValue::String(s) => s.clone(),
            XmlRpcValue::Double(d) => d.to_string(),
            other => format!("{other:?}"),
        }
    }
}

impl From<i32> for XmlRpcValue {
    fn from(v: i32) -> Self {
        XmlRpcValue::Int(v)
    }
}

impl From<&str> for XmlRpcValue {
    fn from(v: &str) -> Self {
        XmlRpcValue::String(v.to_string())
    }
}

impl From<String> for XmlRpcValue {
    fn from(v: String) -> Self {
        XmlRpcValue::String(v)
    }
}

impl From<bool> for XmlRpcValue {
    fn from(v: bool) -> Self {
        XmlRpcValue::Bool(v)
    }
}

impl From<f64> for XmlRpcValue {
    fn from(v: f64) -> Self {
        XmlRpcValue::Double(v)
    }
}

fn escape_into(out: &mut String, text: &str) {
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            // Literal CR would be folded to LF by XML line-ending rules.
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
}

fn write_value(out: &mut String, value: &XmlRpcValue) {
    out.push_str("<value>");
    match value {
        XmlRpcValue::Int(i) => {
            out.push_str("<i4>");
            out.push_str(&i.to_string());
            out.push_str("</i4>");
        }
        XmlRpcValue::Bool(b) => {
            out.push_str("<boolean>");
            out.push(if *b { '1' } else { '0' });
            out.push_str("</boolean>");
        }
        XmlRpcValue::String(s) => {
            out.push_str("<string>");
            escape_into(out, s);
            out.push_str("</string>");
        }
        XmlRpcValue::Double(d) => {
            out.push_str("<double>");
            out.push_str(&d.to_string());
            out.push_str("</double>");
        }
        XmlRpcValue::Array(items) => {
            out.push_str("<array><data>");
            for item in items {
                write_value(out, item);
            }
            out.push_str("</data></array>");
        }
        XmlRpcValue::Struct(members) => {
            out.push_str("<struct>");
            for (name, member) in members {
                out.push_str("<member><name>");
                escape_into(out, name);
                out.push_str("</name>");
                write_value(out, member);
                out.push_str("</member>");
            }
            out.push_str("</struct>");
        }
    }
    out.push_str("</value>");
}

/// Serialize a `methodCall` document.
pub fn serialize_call(method: &str, params: &[XmlRpcValue]) -> String {
    let mut out = String::from("<?xml version='1.0'?>\n<methodCall>\n<methodName>");
    escape_into(&mut out, method);
    out.push_str("</methodName>\n<params>\n");
    for param in params {
        out.push_str("<param>\n");
        write_value(&mut out, param);
        out.push_str("\n</param>\n");
    }
    out.push_str("</params>\n</methodCall>\n");
    out
}

/// Serialize a successful `methodResponse` carrying one value.
pub fn serialize_response(value: &XmlRpcValue) -> String {
    let mut out = String::from("<?xml version='1.0'?>\n<methodResponse>\n<params>\n<param>\n");
    write_value(&mut out, value);
    out.push_str("\n</param>\n</params>\n</methodResponse>\n");
    out
}

/// Serialize a `methodResponse` fault document.
pub fn serialize_fault(code: i32, message: &str) -> String {
    let mut members = BTreeMap::new();
    members.insert("faultCode".to_string(), XmlRpcValue::Int(code));
    members.insert("faultString".to_string(), XmlRpcValue::string(message));
    let mut out = String::from("<?xml version='1.0'?>\n<methodResponse>\n<fault>\n");
    write_value(&mut out, &XmlRpcValue::Struct(members));
    out.push_str("\n</fault>\n</methodResponse>\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum XmlRpcResponse {
    Success(XmlRpcValue),
    Fault { code: i32, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodCall {
    pub name: String,
    pub params: Vec<XmlRpcValue>,
}

use quick_xml::events::Event;
use quick_xml::Reader;

/// Pull-parser cursor with whitespace and comment skipping.
struct Walker<'a> {
    reader: Reader<&'a [u8]>,
    peeked: Option<OwnedEvent>,
}

/// Flattened event shape, detached from the reader's buffer lifetimes.
#[derive(Debug)]
enum OwnedEvent {
    Start(String),
    End(String),
    Empty(String),
    Text(String),
    Eof,
}

impl<'a> Walker<'a> {
    fn new(doc: &'a str) -> Self {
        let mut reader = Reader::from_str(doc);
        reader.config_mut().trim_text(false);
        Walker {
            reader,
            peeked: None,
        }
    }

    fn next(&mut self) -> Result<OwnedEvent, RpcError> {
        if let Some(ev) = self.peeked.take() {
            return Ok(ev);
        }
        loop {
            let event = self
                .reader
                .read_event()
                .map_err(|e| RpcError::Malformed(e.to_string()))?;
            let owned = match event {
                Event::Start(e) => OwnedEvent::Start(name_of(e.name().as_ref())?),
                Event::End(e) => OwnedEvent::End(name_of(e.name().as_ref())?),
                Event::Empty(e) => OwnedEvent::Empty(name_of(e.name().as_ref())?),
                Event::Text(t) => {
                    let raw = std::str::from_utf8(t.as_ref())
                        .map_err(|_| RpcError::Malformed("non-UTF-8 text".into()))?;
                    let text = quick_xml::escape::unescape(raw)
                        .map_err(|e| RpcError::Malformed(e.to_string()))?;
                    if text.chars().all(|c| c.is_ascii_whitespace()) {
                        continue;
                    }
                    OwnedEvent::Text(text.into_owned())
                }
                Event::CData(c) => {
                    let raw = std::str::from_utf8(c.as_ref())
                        .map_err(|_| RpcError::Malformed("non-UTF-8 cdata".into()))?;
                    OwnedEvent::Text(raw.to_string())
                }
                Event::Eof => OwnedEvent::Eof,
                // Declaration, comments, processing instructions, doctypes.
                _ => continue,
            };
            return Ok(owned);
        }
    }

    fn peek(&mut self) -> Result<&OwnedEvent, RpcError> {
        if self.peeked.is_none() {
            let ev = self.next()?;
            self.peeked = Some(ev);
        }
        Ok(self.peeked.as_ref().expect("just stored"))
    }

    fn expect_start(&mut self, tag: &str) -> Result<(), RpcError> {
        match self.next()? {
            OwnedEvent::Start(name) if name == tag => Ok(()),
            other => Err(RpcError::Malformed(format!(
                "expected <{tag}>, found {other:?}"
            ))),
        }
    }

    fn expect_end(&mut self, tag: &str) -> Result<(), RpcError> {
        match self.next()? {
            OwnedEvent::End(name) if name == tag => Ok(()),
            other => Err(RpcError::Malformed(format!(
                "expected </{tag}>, found {other:?}"
            ))),
        }
    }

    /// Text content of the current element up to its end tag. Handles
    /// `<tag>text</tag>` and `<tag/>`.
    fn text_until_end(&mut self, tag: &str) -> Result<String, RpcError> {
        let mut text = String::new();
        loop {
            match self.next_raw_text()? {
                RawText::Text(t) => text.push_str(&t),
                RawText::End(name) => {
                    if name == tag {
                        return Ok(text);
                    }
                    return Err(RpcError::Malformed(format!(
                        "expected </{tag}>, found </{name}>"
                    )));
                }
                RawText::Other(ev) => {
                    return Err(RpcError::Malformed(format!(
                        "unexpected {ev:?} inside <{tag}>"
                    )))
                }
            }
        }
    }

    /// Like `next` but keeps whitespace-only text, which is significant
    /// inside string scalars.
    fn next_raw_text(&mut self) -> Result<RawText, RpcError> {
        if let Some(ev) = self.peeked.take() {
            return Ok(match ev {
                OwnedEvent::Text(t) => RawText::Text(t),
                OwnedEvent::End(name) => RawText::End(name),
                other => RawText::Other(other),
            });
        }
        loop {
            let event = self
                .reader
                .read_event()
                .map_err(|e| RpcError::Malformed(e.to_string()))?;
            return Ok(match event {
                Event::Text(t) => {
                    let raw = std::str::from_utf8(t.as_ref())
                        .map_err(|_| RpcError::Malformed("non-UTF-8 text".into()))?;
                    let text = quick_xml::escape::unescape(raw)
                        .map_err(|e| RpcError::Malformed(e.to_string()))?;
                    RawText::Text(text.into_owned())
                }
                Event::CData(c) => {
                    let raw = std::str::from_utf8(c.as_ref())
                        .map_err(|_| RpcError::Malformed("non-UTF-8 cdata".into()))?;
                    RawText::Text(raw.to_string())
                }
                Event::End(e) => RawText::End(name_of(e.name().as_ref())?),
                Event::Start(e) => RawText::Other(OwnedEvent::Start(name_of(e.name().as_ref())?)),
                Event::Empty(e) => RawText::Other(OwnedEvent::Empty(name_of(e.name().as_ref())?)),
                Event::Eof => RawText::Other(OwnedEvent::Eof),
                _ => continue,
            });
        }
    }
}

enum RawText {
    Text(String),
    End(String),
    Other(OwnedEvent),
}

fn name_of(raw: &[u8]) -> Result<String, RpcError> {
    std::str::from_utf8(raw)
        .map(|s| s.to_string())
        .map_err(|_| RpcError::Malformed("non-UTF-8 tag name".into()))
}

fn parse_scalar(tag: &str, text: &str) -> Result<XmlRpcValue, RpcError> {
    match tag {
        "i4" | "int" | "i8" => text
            .trim()
            .parse::<i32>()
            .map(XmlRpcValue::Int)
            .map_err(|_| RpcError::Malformed(format!("bad integer {text:?}"))),
        "boolean" => match text.trim() {
            "1" | "true" => Ok(XmlRpcValue::Bool(true)),
            "0" | "false" => Ok(XmlRpcValue::Bool(false)),
            other => Err(RpcError::Malformed(format!("bad boolean {other:?}"))),
        },
        "string" => Ok(XmlRpcValue::String(text.to_string())),
        "double" => text
            .trim()
            .parse::<f64>()
            .map(XmlRpcValue::Double)
            .map_err(|_| RpcError::Malformed(format!("bad double {text:?}"))),
        other => Err(RpcError::Malformed(format!(
            "unsupported value type <{other}>"
        ))),
    }
}

fn read_value(walker: &mut Walker, depth: usize) -> Result<XmlRpcValue, RpcError> {
    if depth > MAX_DEPTH {
        return Err(RpcError::TooDeep(MAX_DEPTH));
    }
    match walker.next()? {
        OwnedEvent::Empty(name) if name == "value" => {
            return Ok(XmlRpcValue::String(String::new()))
        }
        OwnedEvent::Start(name) if name == "value" => {}
        other => return Err(RpcError::Malformed(format!("expected <value>: {other:?}"))),
    }

    // Untyped content defaults to string; keep whitespace verbatim there.
    let mut bare_text = String::new();
    let value = loop {
        match walker.next_raw_text()? {
            RawText::Text(t) => bare_text.push_str(&t),
            RawText::End(name) if name == "value" => {
                return Ok(XmlRpcValue::String(bare_text));
            }
            RawText::End(name) => {
                return Err(RpcError::Malformed(format!("stray </{name}> in value")));
            }
            RawText::Other(OwnedEvent::Empty(tag)) => {
                break match tag.as_str() {
                    "array" => XmlRpcValue::Array(Vec::new()),
                    "struct" => XmlRpcValue::Struct(BTreeMap::new()),
                    _ => parse_scalar(&tag, "")?,
                };
            }
            RawText::Other(OwnedEvent::Start(tag)) => {
                break match tag.as_str() {
                    "array" => read_array(walker, depth)?,
                    "struct" => read_struct(walker, depth)?,
                    _ => {
                        let text = walker.text_until_end(&tag)?;
                        parse_scalar(&tag, &text)?
                    }
                };
            }
            RawText::Other(other) => {
                return Err(RpcError::Malformed(format!(
                    "unexpected {other:?} in value"
                )));
            }
        }
    };
    walker.expect_end("value")?;
    Ok(value)
}

/// Caller has consumed `<array>`; reads through `</array>`.
fn read_array(walker: &mut Walker, depth: usize) -> Result<XmlRpcValue, RpcError> {
    match walker.next()? {
        OwnedEvent::Start(name) if name == "data" => {}
        OwnedEvent::Empty(name) if name == "data" => {
            walker.expect_end("array")?;
            return Ok(XmlRpcValue::Array(Vec::new()));
        }
        other => return Err(RpcError::Malformed(format!("expected <data>: {other:?}"))),
    }
    let mut items = Vec::new();
    loop {
        match walker.peek()? {
            OwnedEvent::End(name) if name == "data" => {
                walker.next()?;
                break;
            }
            _ => items.push(read_value(walker, depth + 1)?),
        }
    }
    walker.expect_end("array")?;
    Ok(XmlRpcValue::Array(items))
}

/// Caller has consumed `<struct>`; reads through `</struct>`.
fn read_struct(walker: &mut Walker, depth: usize) -> Result<XmlRpcValue, RpcError> {
    let mut members = BTreeMap::new();
    loop {
        match walker.next()? {
            OwnedEvent::End(name) if name == "struct" => break,
            OwnedEvent::Start(name) if name == "member" => {
                let key = match walker.next()? {
                    OwnedEvent::Start(n) if n == "name" => walker.text_until_end("name")?,
                    OwnedEvent::Empty(n) if n == "name" => String::new(),
                    other => {
                        return Err(RpcError::Malformed(format!("expected <name>: {other:?}")))
                    }
                };
                let value = read_value(walker, depth + 1)?;
                walker.expect_end("member")?;
                members.insert(key, value);
            }
            other => return Err(RpcError::Malformed(format!("expected <member>: {other:?}"))),
        }
    }
    Ok(XmlRpcValue::Struct(members))
}

/// Parse a `methodResponse` document into either its payload value or a
/// fault.
pub fn parse_response(doc: &str) -> Result<XmlRpcResponse, RpcError> {
    let mut walker = Walker::new(doc);
    walker.expect_start("methodResponse")?;
    match walker.next()? {
        OwnedEvent::Start(name) if name == "params" => {
            walker.expect_start("param")?;
            let value = read_value(&mut walker, 0)?;
            walker.expect_end("param")?;
            walker.expect_end("params")?;
            walker.expect_end("methodResponse")?;
            Ok(XmlRpcResponse::Success(value))
        }
        OwnedEvent::Start(name) if name == "fault" => {
            let value = read_value(&mut walker, 0)?;
            walker.expect_end("fault")?;
            walker.expect_end("methodResponse")?;
            let XmlRpcValue::Struct(members) = value else {
                return Err(RpcError::Malformed("fault payload is not a struct".into()));
            };
            let code = members
                .get("faultCode")
                .and_then(XmlRpcValue::as_i32)
                .unwrap_or(0);
            let message = members
                .get("faultString")
                .and_then(XmlRpcValue::as_str)
                .unwrap_or("")
                .to_string();
            Ok(XmlRpcResponse::Fault { code, message })
        }
        other => Err(RpcError::Malformed(format!(
            "expected <params> or <fault>: {other:?}"
        ))),
    }
}

/// Parse a `methodCall` document (used by the mock master).
pub fn parse_call(doc: &str) -> Result<MethodCall, RpcError> {
    let mut walker = Walker::new(doc);
    walker.expect_start("methodCall")?;
    walker.expect_start("methodName")?;
    let name = walker.text_until_end("methodName")?;
    let mut params = Vec::new();
    match walker.next()? {
        OwnedEvent::End(n) if n == "methodCall" => {
            return Ok(MethodCall { name, params });
        }
        OwnedEvent::Start(n) if n == "params" => {}
        OwnedEvent::Empty(n) if n == "params" => {
            walker.expect_end("methodCall")?;
            return Ok(MethodCall { name, params });
        }
        other => return Err(RpcError::Malformed(format!("expected <params>: {other:?}"))),
    }
    loop {
        match walker.next()? {
            OwnedEvent::End(n) if n == "params" => break,
            OwnedEvent::Start(n) if n == "param" => {
                params.push(read_value(&mut walker, 0)?);
                walker.expect_end("param")?;
            }
            other => return Err(RpcError::Malformed(format!("expected <param>: {other:?}"))),
        }
    }
    walker.expect_end("methodCall")?;
    Ok(MethodCall { name, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn call_document_matches_wire_format_exactly() {
        let doc = serialize_call(
            "getSystemState",
            &[XmlRpcValue::string("/rosint_scanner")],
        );
        assert_eq!(
            doc,
            "<?xml version='1.0'?>\n<methodCall>\n<methodName>getSystemState</methodName>\n\
             <params>\n<param>\n<value><string>/rosint_scanner</string></value>\n</param>\n\
             </params>\n</methodCall>\n"
        );
    }

    #[test]
    fn parses_a_stock_master_system_state_response() {
        // Shape emitted by a rospy master for getSystemState with one /rosout
        // publisher; whitespace and <int> spelling vary across servers.
        let doc = r#"<?xml version='1.0'?>
<methodResponse>
<params>
<param>
<value><array><data>
<value><int>1</int></value>
<value><string>current system state</string></value>
<value><array><data>
<value><array><data>
<value><array><data>
<value><string>/rosout</string></value>
<value><array><data><value><string>/rosout</string></value></data></array></value>
</data></array></value>
</data></array></value>
<value><array><data></data></array></value>
<value><array><data></data></array></value>
</data></array></value>
</data></array></value>
</param>
</params>
</methodResponse>
"#;
        let XmlRpcResponse::Success(value) = parse_response(doc).unwrap() else {
            panic!("expected success");
        };
        let triple = value.as_array().unwrap();
        assert_eq!(triple[0], XmlRpcValue::Int(1));
        assert_eq!(triple[1].as_str(), Some("current system state"));
        let state = triple[2].as_array().unwrap();
        assert_eq!(state.len(), 3);
        let publishers = state[0].as_array().unwrap();
        assert_eq!(publishers[0].as_array().unwrap()[0].as_str(), Some("/rosout"));
    }

    #[test]
    fn parses_fault_documents() {
        let doc = serialize_fault(-1, "method not supported");
        match parse_response(&doc).unwrap() {
            XmlRpcResponse::Fault { code, message } => {
                assert_eq!(code, -1);
                assert_eq!(message, "method not supported");
            }
            other => panic!("expected fault, got {other:?}"),
        }
    }

    #[test]
    fn bare_text_value_defaults_to_string() {
        let doc = "<methodResponse><params><param><value>plain text</value></param></params></methodResponse>";
        assert_eq!(
            parse_response(doc).unwrap(),
            XmlRpcResponse::Success(XmlRpcValue::string("plain text"))
        );
        let empty = "<methodResponse><params><param><value/></param></params></methodResponse>";
        assert_eq!(
            parse_response(empty).unwrap(),
            XmlRpcResponse::Success(XmlRpcValue::string(""))
        );
    }

    #[test]
    fn entities_round_trip() {
        let original = XmlRpcValue::string("a<b&c>d\"e'f\rg");
        let doc = serialize_response(&original);
        assert_eq!(parse_response(&doc).unwrap(), XmlRpcResponse::Success(original));
        let numeric =
            "<methodResponse><params><param><value><string>&#65;&#x42;</string></value></param></params></methodResponse>";
        assert_eq!(
            parse_response(numeric).unwrap(),
            XmlRpcResponse::Success(XmlRpcValue::string("AB"))
        );
    }

    #[test]
    fn call_round_trip_with_params() {
        let call = serialize_call(
            "getParam",
            &[
                XmlRpcValue::string("/rosint_scanner"),
                XmlRpcValue::string("/rosversion"),
            ],
        );
        let parsed = parse_call(&call).unwrap();
        assert_eq!(parsed.name, "getParam");
        assert_eq!(parsed.params.len(), 2);
        assert_eq!(parsed.params[1].as_str(), Some("/rosversion"));
    }

    #[test]
    fn rejects_unsupported_types_and_junk() {
        let bad = "<methodResponse><params><param><value><dateTime.iso8601>x</dateTime.iso8601></value></param></params></methodResponse>";
        assert!(parse_response(bad).is_err());
        assert!(parse_response("not xml at all").is_err());
        assert!(parse_response("<methodResponse></methodResponse>").is_err());
    }

    /// Strings restricted to characters XML 1.0 can carry at all.
    fn xml_safe_string() -> impl Strategy<Value = String> {
        proptest::collection::vec(
            proptest::char::ranges(vec!['\t'..='\t', ' '..='~', '\u{a0}'..='\u{d7ff}'].into()),
            0..24,
        )
        .prop_map(|chars| chars.into_iter().collect())
    }

    fn arb_value() -> impl Strategy<Value = XmlRpcValue> {
        let leaf = prop_oneof![
            any::<i32>().prop_map(XmlRpcValue::Int),
            any::<bool>().prop_map(XmlRpcValue::Bool),
            xml_safe_string().prop_map(XmlRpcValue::String),
            proptest::num::f64::NORMAL.prop_map(XmlRpcValue::Double),
        ];
        leaf.prop_recursive(5, 64, 6, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 0..6).prop_map(XmlRpcValue::Array),
                proptest::collection::btree_map(xml_safe_string(), inner, 0..6)
                    .prop_map(XmlRpcValue::Struct),
            ]
        })
    }

    proptest! {
        #[test]
        fn serialize_parse_identity(value in arb_value()) {
            let doc = serialize_response(&value);
            prop_assert_eq!(parse_response(&doc).unwrap(), XmlRpcResponse::Success(value));
        }
    }
}
