//! Line-oriented record files: the dialect shared by the classifier rulebook,
//! mock fleet specs, matcher rules, and scan config files.
//!
//! Each non-blank, non-comment line is one record: a bare kind word followed
//! by `key=value` fields. Values with spaces are double-quoted; `\"` and `\\`
//! escape inside quotes. Keys may repeat.
//!
//! ```text
//! # comment
//! rule id=sensor.camera kind=sensor label=Camera match_on=topic pattern=camera
//! fixture kind=master port=11311
//! topic name=/camera/image_raw pub=/cam_node
//! ```

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecError {
    #[error("reading {file}: {source}")]
    Io {
        file: String,
        source: std::io::Error,
    },
    #[error("line {line_no}: {reason}")]
    Syntax { line_no: usize, reason: String },
    #[error("line {line_no}: missing required field {key:?}")]
    MissingField { line_no: usize, key: String },
    #[error("line {line_no}: bad value for {key:?}: {reason}")]
    BadValue {
        line_no: usize,
        key: String,
        reason: String,
    },
    #[error("line {line_no}: unknown record kind {kind:?}")]
    UnknownKind { line_no: usize, kind: String },
}

#[derive(Debug, Clone)]
pub struct Record {
    pub kind: String,
    pub fields: Vec<(String, String)>,
    pub line_no: usize,
}

impl Record {
    pub fn first(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> {
        self.fields
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, RecError> {
        self.first(key).ok_or_else(|| RecError::MissingField {
            line_no: self.line_no,
            key: key.to_string(),
        })
    }
}

pub fn parse_file(path: &Path) -> Result<Vec<Record>, RecError> {
    let text = std::fs::read_to_string(path).map_err(|source| RecError::Io {
        file: path.display().to_string(),
        source,
    })?;
    parse_records(&text)
}

pub fn parse_records(text: &str) -> Result<Vec<Record>, RecError> {
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens = tokenize(line, line_no)?;
        let mut iter = tokens.into_iter();
        let kind = match iter.next() {
            Some(Token::Bare(kind)) => kind,
            Some(Token::Pair(k, _)) => {
                return Err(RecError::Syntax {
                    line_no,
                    reason: format!("line must start with a record kind, found field {k:?}"),
                })
            }
            None => continue,
        };
        let mut fields = Vec::new();
        for token in iter {
            match token {
                Token::Pair(k, v) => fields.push((k, v)),
                Token::Bare(word) => {
                    return Err(RecError::Syntax {
                        line_no,
                        reason: format!("expected key=value, found bare word {word:?}"),
                    })
                }
            }
        }
        records.push(Record {
            kind,
            fields,
            line_no,
        });
    }
    Ok(records)
}

enum Token {
    Bare(String),
    Pair(String, String),
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<Token>, RecError> {
    let mut tokens = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c == '#' {
            break;
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c.is_whitespace() || c == '=' {
                break;
            }
            key.push(c);
            chars.next();
        }
        if chars.peek() != Some(&'=') {
            tokens.push(Token::Bare(key));
            continue;
        }
        chars.next(); // consume '='
        let value = if chars.peek() == Some(&'"') {
            chars.next();
            let mut value = String::new();
            loop {
                match chars.next() {
                    Some('\\') => match chars.next() {
                        Some(next @ ('"' | '\\')) => value.push(next),
                        Some(other) => {
                            value.push('\\');
                            value.push(other);
                        }
                        None => {
                            return Err(RecError::Syntax {
                                line_no,
                                reason: "dangling escape at end of line".into(),
                            })
                        }
                    },
                    Some('"') => break,
                    Some(c) => value.push(c),
                    None => {
                        return Err(RecError::Syntax {
                            line_no,
                            reason: format!("unterminated quote in value of {key:?}"),
                        })
                    }
                }
            }
            value
        } else {
            let mut value = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                value.push(c);
                chars.next();
            }
            value
        };
        tokens.push(Token::Pair(key, value));
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mixed_records() {
        let text = "# rulebook\nrule id=a.b label=\"Camera + Depth\" pattern=depth_registered\n\nfixture kind=master port=11311\ntopic name=/x pub=/n1 pub=/n2\n";
        let records = parse_records(text).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].kind, "rule");
        assert_eq!(records[0].first("label"), Some("Camera + Depth"));
        assert_eq!(records[2].all("pub").collect::<Vec<_>>(), vec!["/n1", "/n2"]);
        assert_eq!(records[1].line_no, 4);
    }

    #[test]
    fn trailing_comments_and_escapes() {
        let records =
            parse_records("rule id=x pattern=\"say \\\"hi\\\"\" # inline comment\n").unwrap();
        assert_eq!(records[0].first("pattern"), Some("say \"hi\""));
    }

    #[test]
    fn unterminated_quote_is_an_error() {
        assert!(matches!(
            parse_records("rule id=\"oops\n"),
            Err(RecError::Syntax { line_no: 1, .. })
        ));
    }

    #[test]
    fn require_reports_missing_fields() {
        let records = parse_records("rule id=x\n").unwrap();
        assert!(records[0].require("pattern").is_err());
        assert_eq!(records[0].require("id").unwrap(), "x");
    }
}
