//! WebSocket client (and the server half the mock fleet needs): RFC 6455
//! handshake with accept-key verification plus text-frame I/O. Only the
//! subset Rosbridge traffic exercises is implemented — text, ping/pong,
//! close, client-side masking.

use std::net::SocketAddr;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rand::RngCore;
use sha1::{Digest, Sha1};
use thiserror::Error;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

use crate::http::{self, HttpResponse};

const WS_GUID: &str = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
const MAX_MESSAGE: usize = 16 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum WsError {
    #[error("websocket handshake timed out")]
    Timeout,
    #[error("malformed websocket traffic: {0}")]
    Malformed(String),
    #[error("message larger than {MAX_MESSAGE} bytes")]
    TooLarge,
    #[error("connection closed")]
    Closed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sec-WebSocket-Accept derivation: base64(SHA-1(key + GUID)).
pub fn accept_key_for(key: &str) -> String {
    let mut hasher = Sha1::new();
    hasher.update(key.as_bytes());
    hasher.update(WS_GUID.as_bytes());
    BASE64.encode(hasher.finalize())
}

/// Result of attempting a client upgrade handshake. `stream` is present only
/// when the server answered 101 with the correct accept key.
pub struct WsConnectOutcome {
    pub response: HttpResponse,
    pub reject_reason: Option<String>,
    pub stream: Option<WsStream>,
}

/// One RFC-compliant upgrade attempt against `target`.
pub async fn client_connect(
    target: SocketAddr,
    user_agent: &str,
    timeout: Duration,
) -> Result<WsConnectOutcome, WsError> {
    let work = async move {
        let mut stream = TcpStream::connect(target).await?;
        let mut key_bytes = [0u8; 16];
        rand::rng().fill_bytes(&mut key_bytes);
        let key = BASE64.encode(key_bytes);
        let request = format!(
            "GET / HTTP/1.1\r\nHost: {target}\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n\
             Sec-WebSocket-Key: {key}\r\nSec-WebSocket-Version: 13\r\nUser-Agent: {user_agent}\r\n\r\n"
        );
        stream.write_all(request.as_bytes()).await?;
        let (mut response, leftover) = http::read_response_head(&mut stream)
            .await
            .map_err(|e| WsError::Malformed(e.to_string()))?;

        if response.status != 101 {
            // Not an upgrade; pull a body prefix as fingerprint evidence.
            let mut body = leftover;
            body.truncate(1024);
            if body.len() < 1024 {
                let mut chunk = [0u8; 1024];
                if let Ok(Ok(n)) =
                    tokio::time::timeout(Duration::from_millis(200), stream.read(&mut chunk)).await
                {
                    body.extend_from_slice(&chunk[..n.min(1024 - body.len())]);
                }
            }
            response.body = body;
            return Ok(WsConnectOutcome {
                reject_reason: Some(format!("status {} instead of 101", response.status)),
                response,
                stream: None,
            });
        }
        let expected = accept_key_for(&key);
        match response.header("Sec-WebSocket-Accept") {
            Some(got) if got == expected => Ok(WsConnectOutcome {
                response,
                reject_reason: None,
                stream: Some(WsStream::new(stream, leftover, Role::Client)),
            }),
            Some(_) => Ok(WsConnectOutcome {
                response,
                reject_reason: Some("bad-accept".into()),
                stream: None,
            }),
            None => Ok(WsConnectOutcome {
                response,
                reject_reason: Some("missing Sec-WebSocket-Accept".into()),
                stream: None,
            }),
        }
    };
    tokio::time::timeout(timeout, work)
        .await
        .map_err(|_| WsError::Timeout)?
}

/// Server side of the handshake (mock fleet): reply 101 for `key` and wrap
/// the stream.
pub async fn server_upgrade(
    mut stream: TcpStream,
    key: &str,
    leftover: Vec<u8>,
) -> Result<WsStream, WsError> {
    let accept = accept_key_for(key);
    let response = format!(
        "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n\
         Sec-WebSocket-Accept: {accept}\r\n\r\n"
    );
    stream.write_all(response.as_bytes()).await?;
    Ok(WsStream::new(stream, leftover, Role::Server))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Client,
    Server,
}

#[derive(Debug, PartialEq)]
pub enum WsMessage {
    Text(String),
    Binary(Vec<u8>),
}

pub struct WsStream {
    stream: TcpStream,
    pending: Vec<u8>,
    role: Role,
    sent_close: bool,
}

impl WsStream {
    fn new(stream: TcpStream, pending: Vec<u8>, role: Role) -> Self {
        WsStream {
            stream,
            pending,
            role,
            sent_close: false,
        }
    }

    pub async fn send_text(&mut self, payload: &str) -> Result<(), WsError> {
        self.send_frame(0x1, payload.as_bytes()).await
    }

    async fn send_frame(&mut self, opcode: u8, payload: &[u8]) -> Result<(), WsError> {
        let mut frame = Vec::with_capacity(payload.len() + 14);
        frame.push(0x80 | opcode);
        let mask_bit = if self.role == Role::Client { 0x80 } else { 0x00 };
        match payload.len() {
            len if len < 126 => frame.push(mask_bit | len as u8),
            len if len <= u16::MAX as usize => {
                frame.push(mask_bit | 126);
                frame.extend_from_slice(&(len as u16).to_be_bytes());
            }
            len => {
                frame.push(mask_bit | 127);
                frame.extend_from_slice(&(len as u64).to_be_bytes());
            }
        }
        if self.role == Role::Client {
            let mut mask = [0u8; 4];
            rand::rng().fill_bytes(&mut mask);
            frame.extend_from_slice(&mask);
            frame.extend(payload.iter().enumerate().map(|(i, b)| b ^ mask[i % 4]));
        } else {
            frame.extend_from_slice(payload);
        }
        self.stream.write_all(&frame).await?;
        Ok(())
    }

    /// Next complete data message, transparently answering pings and closing
    /// cleanly. `Ok(None)` means the peer closed.
    pub async fn next_message(&mut self, timeout: Duration) -> Result<Option<WsMessage>, WsError> {
        let deadline = tokio::time::Instant::now() + timeout;
        let mut assembled: Option<(u8, Vec<u8>)> = None;
        loop {
            let remaining = deadline
                .checked_duration_since(tokio::time::Instant::now())
                .ok_or(WsError::Timeout)?;
            let frame = tokio::time::timeout(remaining, self.read_frame())
                .await
                .map_err(|_| WsError::Timeout)??;
            let Some(frame) = frame else {
                return Ok(None);
            };
            match frame.opcode {
                0x1 | 0x2 => {
                    if assembled.is_some() {
                        return Err(WsError::Malformed("data frame inside fragment".into()));
                    }
                    if frame.fin {
                        return Ok(Some(to_message(frame.opcode, frame.payload)?));
                    }
                    assembled = Some((frame.opcode, frame.payload));
                }
                0x0 => {
                    let Some((opcode, ref mut buf)) = assembled else {
                        return Err(WsError::Malformed("continuation without start".into()));
                    };
                    if buf.len() + frame.payload.len() > MAX_MESSAGE {
                        return Err(WsError::TooLarge);
                    }
                    buf.extend_from_slice(&frame.payload);
                    if frame.fin {
                        let (_, buf) = assembled.take().expect("just matched");
                        return Ok(Some(to_message(opcode, buf)?));
                    }
                }
                0x8 => {
                    if !self.sent_close {
                        let _ = self.send_frame(0x8, &frame.payload).await;
                        self.sent_close = true;
                    }
                    return Ok(None);
                }
                0x9 => self.send_frame(0xA, &frame.payload).await?,
                0xA => {}
                other => return Err(WsError::Malformed(format!("opcode {other:#x}"))),
            }
        }
    }

    pub async fn close(&mut self) {
        if !self.sent_close {
            let _ = self.send_frame(0x8, &[]).await;
            self.sent_close = true;
        }
        let _ = self.stream.shutdown().await;
    }

    async fn read_frame(&mut self) -> Result<Option<Frame>, WsError> {
        let mut header = [0u8; 2];
        if !self.read_exact_or_eof(&mut header).await? {
            return Ok(None);
        }
        let fin = header[0] & 0x80 != 0;
        if header[0] & 0x70 != 0 {
            return Err(WsError::Malformed("reserved bits set".into()));
        }
        let opcode = header[0] & 0x0f;
        let masked = header[1] & 0x80 != 0;
        // Each side must only accept the peer's masking discipline.
        match self.role {
            Role::Client if masked => {
                return Err(WsError::Malformed("server sent masked frame".into()))
            }
            Role::Server if !masked => {
                return Err(WsError::Malformed("client sent unmasked frame".into()))
            }
            _ => {}
        }
        let len = match header[1] & 0x7f {
            126 => {
                let mut ext = [0u8; 2];
                self.read_exact(&mut ext).await?;
                u16::from_be_bytes(ext) as usize
            }
            127 => {
                let mut ext = [0u8; 8];
                self.read_exact(&mut ext).await?;
                let len = u64::from_be_bytes(ext);
                usize::try_from(len).map_err(|_| WsError::TooLarge)?
            }
            small => small as usize,
        };
        if len > MAX_MESSAGE {
            return Err(WsError::TooLarge);
        }
        let mask = if masked {
            let mut mask = [0u8; 4];
            self.read_exact(&mut mask).await?;
            Some(mask)
        } else {
            None
        };
        let mut payload = vec![0u8; len];
        self.read_exact(&mut payload).await?;
        if let Some(mask) = mask {
            for (i, byte) in payload.iter_mut().enumerate() {
                *byte ^= mask[i % 4];
            }
        }
        Ok(Some(Frame {
            fin,
            opcode,
            payload,
        }))
    }

    async fn read_exact(&mut self, buf: &mut [u8]) -> Result<(), WsError> {
        if self.read_exact_or_eof(buf).await? {
            Ok(())
        } else {
            Err(WsError::Closed)
        }
    }

    /// False on clean EOF before the first byte; mid-buffer EOF is an error.
    async fn read_exact_or_eof(&mut self, buf: &mut [u8]) -> Result<bool, WsError> {
        let mut filled = 0usize;
        while filled < buf.len() {
            if !self.pending.is_empty() {
                let take = self.pending.len().min(buf.len() - filled);
                buf[filled..filled + take].copy_from_slice(&self.pending[..take]);
                self.pending.drain(..take);
                filled += take;
                continue;
            }
            let n = self.stream.read(&mut buf[filled..]).await?;
            if n == 0 {
                if filled == 0 {
                    return Ok(false);
                }
                return Err(WsError::Closed);
            }
            filled += n;
        }
        Ok(true)
    }
}

struct Frame {
    fin: bool,
    opcode: u8,
    payload: Vec<u8>,
}

fn to_message(opcode: u8, payload: Vec<u8>) -> Result<WsMessage, WsError> {
    match opcode {
        0x1 => String::from_utf8(payload)
            .map(WsMessage::Text)
            .map_err(|_| WsError::Malformed("text frame is not UTF-8".into())),
        _ => Ok(WsMessage::Binary(payload)),
    }
}
