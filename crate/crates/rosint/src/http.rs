//! Minimal HTTP/1.1 plumbing: one request per connection, no redirects, no
//! keep-alive. Shared by the fingerprint stage, the XML-RPC client, the
//! WebSocket handshake, and the mock servers.

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("malformed HTTP: {0}")]
    Malformed(String),
    #[error("response larger than {0} bytes")]
    TooLarge(usize),
    #[error("connection closed before a full message arrived")]
    Truncated,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const MAX_HEAD: usize = 32 * 1024;

#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub reason: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl HttpResponse {
    /// First header with the given name, case-insensitively.
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct RequestHead {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
}

impl RequestHead {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// How to treat response bodies that exceed the cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyLimit {
    /// Keep the first N bytes, silently dropping the rest.
    Prefix(usize),
    /// Fail with `TooLarge` beyond N bytes.
    Exact(usize),
}

impl BodyLimit {
    fn cap(self) -> usize {
        match self {
            BodyLimit::Prefix(n) | BodyLimit::Exact(n) => n,
        }
    }
}

/// Read bytes until the blank line ending an HTTP head. Returns the head and
/// any bytes read past it.
async fn read_until_head_end(stream: &mut TcpStream) -> Result<(Vec<u8>, Vec<u8>), HttpError> {
    let mut buf = Vec::with_capacity(1024);
    let mut chunk = [0u8; 1024];
    loop {
        if let Some(pos) = find_head_end(&buf) {
            let rest = buf.split_off(pos + 4);
            buf.truncate(pos);
            return Ok((buf, rest));
        }
        if buf.len() > MAX_HEAD {
            return Err(HttpError::TooLarge(MAX_HEAD));
        }
        let n = stream.read(&mut chunk).await?;
        if n == 0 {
            return Err(HttpError::Truncated);
        }
        buf.extend_from_slice(&chunk[..n]);
    }
}

fn find_head_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn parse_headers(lines: std::str::Lines<'_>) -> Vec<(String, String)> {
    lines
        .filter_map(|line| {
            let (name, value) = line.split_once(':')?;
            Some((name.trim().to_string(), value.trim().to_string()))
        })
        .collect()
}

/// Parse a response head; returns the parsed head plus body bytes already
/// consumed from the socket.
pub async fn read_response_head(
    stream: &mut TcpStream,
) -> Result<(HttpResponse, Vec<u8>), HttpError> {
    let (head, leftover) = read_until_head_end(stream).await?;
    let text = std::str::from_utf8(&head)
        .map_err(|_| HttpError::Malformed("non-UTF-8 header block".into()))?;
    let mut lines = text.lines();
    let status_line = lines
        .next()
        .ok_or_else(|| HttpError::Malformed("empty head".into()))?;
    let mut parts = status_line.splitn(3, ' ');
    let version = parts.next().unwrap_or("");
    if !version.starts_with("HTTP/") {
        return Err(HttpError::Malformed(format!(
            "bad status line {status_line:?}"
        )));
    }
    let status: u16 = parts
        .next()
        .unwrap_or("")
        .parse()
        .map_err(|_| HttpError::Malformed(format!("bad status code in {status_line:?}")))?;
    let reason = parts.next().unwrap_or("").to_string();
    Ok((
        HttpResponse {
            status,
            reason,
            headers: parse_headers(lines),
            body: Vec::new(),
        },
        leftover,
    ))
}

/// Read a full response: head plus body framed by Content-Length, chunked
/// encoding, or connection close.
pub async fn read_response(
    stream: &mut TcpStream,
    limit: BodyLimit,
) -> Result<HttpResponse, HttpError> {
    let (mut response, leftover) = read_response_head(stream).await?;
    let cap = limit.cap();

    let chunked = response
        .header("Transfer-Encoding")
        .map(|v| v.to_ascii_lowercase().contains("chunked"))
        .unwrap_or(false);
    let content_length = response
        .header("Content-Length")
        .and_then(|v| v.parse::<usize>().ok());

    let mut body = leftover;
    if chunked {
        read_to_cap(stream, &mut body, cap.saturating_mul(2).max(cap)).await?;
        body = dechunk(&body)?;
        if body.len() > cap {
            if let BodyLimit::Exact(_) = limit {
                return Err(HttpError::TooLarge(cap));
            }
            body.truncate(cap);
        }
    } else if let Some(len) = content_length {
        if len > cap {
            if let BodyLimit::Exact(_) = limit {
                return Err(HttpError::TooLarge(cap));
            }
        }
        let want = len.min(cap);
        while body.len() < want {
            let mut chunk = vec![0u8; (want - body.len()).min(16 * 1024)];
            let n = stream.read(&mut chunk).await?;
            if n == 0 {
                // A short body is truncation for exact reads; for prefix
                // reads whatever arrived is the prefix.
                if matches!(limit, BodyLimit::Exact(_)) && body.len() < len {
                    return Err(HttpError::Truncated);
                }
                break;
            }
            body.extend_from_slice(&chunk[..n]);
        }
        body.truncate(want);
    } else {
        read_to_cap(stream, &mut body, cap).await?;
    }

    response.body = body;
    Ok(response)
}

async fn read_to_cap(
    stream: &mut TcpStream,
    body: &mut Vec<u8>,
    cap: usize,
) -> Result<(), HttpError> {
    let mut chunk = [0u8; 16 * 1024];
    while body.len() < cap {
        let n = stream.read(&mut chunk).await?;
        if n == 0 {
            return Ok(());
        }
        let take = n.min(cap - body.len());
        body.extend_from_slice(&chunk[..take]);
        if take < n {
            break;
        }
    }
    Ok(())
}

fn dechunk(raw: &[u8]) -> Result<Vec<u8>, HttpError> {
    let mut out = Vec::new();
    let mut pos = 0usize;
    loop {
        let line_end = raw[pos..]
            .windows(2)
            .position(|w| w == b"\r\n")
            .ok_or(HttpError::Truncated)?;
        let size_line = std::str::from_utf8(&raw[pos..pos + line_end])
            .map_err(|_| HttpError::Malformed("bad chunk size line".into()))?;
        let size_token = size_line.split(';').next().unwrap_or("").trim();
        let size = usize::from_str_radix(size_token, 16)
            .map_err(|_| HttpError::Malformed(format!("bad chunk size {size_token:?}")))?;
        pos += line_end + 2;
        if size == 0 {
            return Ok(out);
        }
        if pos + size + 2 > raw.len() {
            return Err(HttpError::Truncated);
        }
        out.extend_from_slice(&raw[pos..pos + size]);
        pos += size + 2;
    }
}

/// Parse a request head (mock server side).
pub async fn read_request_head(
    stream: &mut TcpStream,
) -> Result<(RequestHead, Vec<u8>), HttpError> {
    let (head, leftover) = read_until_head_end(stream).await?;
    let text = std::str::from_utf8(&head)
        .map_err(|_| HttpError::Malformed("non-UTF-8 header block".into()))?;
    let mut lines = text.lines();
    let request_line = lines
        .next()
        .ok_or_else(|| HttpError::Malformed("empty head".into()))?;
    let mut parts = request_line.split_whitespace();
    let method = parts
        .next()
        .ok_or_else(|| HttpError::Malformed("missing method".into()))?
        .to_string();
    let path = parts
        .next()
        .ok_or_else(|| HttpError::Malformed("missing path".into()))?
        .to_string();
    Ok((
        RequestHead {
            method,
            path,
            headers: parse_headers(lines),
        },
        leftover,
    ))
}

/// Read a request body of `len` bytes, `prefix` already consumed.
pub async fn read_request_body(
    stream: &mut TcpStream,
    mut prefix: Vec<u8>,
    len: usize,
) -> Result<Vec<u8>, HttpError> {
    const MAX_REQUEST_BODY: usize = 4 * 1024 * 1024;
    if len > MAX_REQUEST_BODY {
        return Err(HttpError::TooLarge(MAX_REQUEST_BODY));
    }
    while prefix.len() < len {
        let mut chunk = vec![0u8; (len - prefix.len()).min(16 * 1024)];
        let n = stream.read(&mut chunk).await?;
        if n == 0 {
            return Err(HttpError::Truncated);
        }
        prefix.extend_from_slice(&chunk[..n]);
    }
    prefix.truncate(len);
    Ok(prefix)
}

/// Write a simple response with Content-Length framing and close semantics.
pub async fn write_response(
    stream: &mut TcpStream,
    status: u16,
    reason: &str,
    headers: &[(&str, &str)],
    body: &[u8],
) -> Result<(), HttpError> {
    let mut head = format!("HTTP/1.1 {status} {reason}\r\n");
    for (name, value) in headers {
        head.push_str(name);
        head.push_str(": ");
        head.push_str(value);
        head.push_str("\r\n");
    }
    head.push_str(&format!("Content-Length: {}\r\nConnection: close\r\n\r\n", body.len()));
    stream.write_all(head.as_bytes()).await?;
    stream.write_all(body).await?;
    stream.flush().await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tokio::net::TcpListener;

    async fn pair() -> (TcpStream, TcpStream) {
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let client = TcpStream::connect(addr).await.unwrap();
        let (server, _) = listener.accept().await.unwrap();
        (client, server)
    }

    #[tokio::test]
    async fn parses_content_length_response() {
        let (mut client, mut server) = pair().await;
        tokio::spawn(async move {
            server
                .write_all(b"HTTP/1.1 200 OK\r\nServer: test\r\nContent-Length: 5\r\n\r\nhello")
                .await
                .unwrap();
        });
        let resp = read_response(&mut client, BodyLimit::Exact(1024)).await.unwrap();
        assert_eq!(resp.status, 200);
        assert_eq!(resp.header("server"), Some("test"));
        assert_eq!(resp.body, b"hello");
    }

    #[tokio::test]
    async fn prefix_limit_truncates_body() {
        let (mut client, mut server) = pair().await;
        tokio::spawn(async move {
            server
                .write_all(b"HTTP/1.1 200 OK\r\nContent-Length: 10\r\n\r\n0123456789")
                .await
                .unwrap();
        });
        let resp = read_response(&mut client, BodyLimit::Prefix(4)).await.unwrap();
        assert_eq!(resp.body, b"0123");
    }

    #[tokio::test]
    async fn chunked_bodies_are_decoded() {
        let (mut client, mut server) = pair().await;
        tokio::spawn(async move {
            server
                .write_all(
                    b"HTTP/1.1 200 OK\r\nTransfer-Encoding: chunked\r\n\r\n5\r\nhello\r\n6\r\n world\r\n0\r\n\r\n",
                )
                .await
                .unwrap();
        });
        let resp = read_response(&mut client, BodyLimit::Prefix(1024)).await.unwrap();
        assert_eq!(resp.body, b"hello world");
    }

    #[tokio::test]
    async fn malformed_status_line_is_an_error() {
        let (mut client, mut server) = pair().await;
        tokio::spawn(async move {
            server.write_all(b"SSH-2.0-OpenSSH\r\n\r\n").await.unwrap();
        });
        assert!(matches!(
            read_response(&mut client, BodyLimit::Prefix(64)).await,
            Err(HttpError::Malformed(_))
        ));
    }

    #[tokio::test]
    async fn request_head_round_trip() {
        let (mut client, mut server) = pair().await;
        tokio::spawn(async move {
            client
                .write_all(b"POST / HTTP/1.1\r\nHost: x\r\nContent-Length: 2\r\n\r\nok")
                .await
                .unwrap();
        });
        let (head, leftover) = read_request_head(&mut server).await.unwrap();
        assert_eq!(head.method, "POST");
        assert_eq!(head.path, "/");
        let body = read_request_body(&mut server, leftover, 2).await.unwrap();
        assert_eq!(body, b"ok");
    }
}
