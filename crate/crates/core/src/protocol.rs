// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Wire format for probe, completion and report messages.
//!
//! Every frame starts with the ASCII magic `UBE1` and a one-byte type tag.
//! All integers are big-endian.
//!
//! ```text
//! probe:       magic(4) 0x00 tab(8) payload_len(4) payload(payload_len)
//! completion:  magic(4) 0x01 tab(8)
//! report:      magic(4) 0x02 uavg_bps(8) sample_count(4)
//! ```
//!
//! Datagram transports carry exactly one frame per datagram. Stream
//! transports concatenate frames and rely on [`StreamDecoder`] (or
//! [`decode_stream`]) to split them again.

use bytes::Bytes;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"UBE1";

/// Largest padding a probe may carry.
pub const MAX_PAYLOAD: u32 = 1 << 20;

pub const TYPE_PROBE: u8 = 0x00;
pub const TYPE_COMPLETION: u8 = 0x01;
pub const TYPE_REPORT: u8 = 0x02;

/// Probe header: magic, type, tab, payload_len.
pub const PROBE_HEADER_LEN: usize = 4 + 1 + 8 + 4;
pub const COMPLETION_LEN: usize = 4 + 1 + 8;
pub const REPORT_LEN: usize = 4 + 1 + 8 + 4;

static ZERO_PAD: [u8; MAX_PAYLOAD as usize] = [0; MAX_PAYLOAD as usize];

/// One probe message. `tab_total_bytes` is the source's cumulative byte
/// counter, including this frame's own wire length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeFrame {
    pub tab_total_bytes: u64,
    pub payload: Bytes,
}

impl ProbeFrame {
    /// A probe padded with `payload_len` zero bytes. Lengths above
    /// [`MAX_PAYLOAD`] are kept as-is and rejected by the encoder.
    pub fn zero_padded(tab_total_bytes: u64, payload_len: usize) -> Self {
        let payload = if payload_len <= ZERO_PAD.len() {
            Bytes::from_static(&ZERO_PAD[..payload_len])
        } else {
            Bytes::from(vec![0u8; payload_len])
        };
        Self {
            tab_total_bytes,
            payload,
        }
    }

    /// A probe whose encoded length is exactly `wire_len` bytes.
    pub fn with_wire_len(tab_total_bytes: u64, wire_len: usize) -> Self {
        Self::zero_padded(tab_total_bytes, wire_len.saturating_sub(PROBE_HEADER_LEN))
    }

    pub fn payload_len(&self) -> usize {
        self.payload.len()
    }

    pub fn wire_len(&self) -> usize {
        PROBE_HEADER_LEN + self.payload.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompletionFrame {
    pub tab_total_bytes: u64,
}

/// A helper's averaged estimate, sent back to the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportFrame {
    pub uavg_bps: u64,
    pub sample_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    Probe(ProbeFrame),
    Completion(CompletionFrame),
    Report(ReportFrame),
}

impl Frame {
    pub fn wire_len(&self) -> usize {
        match self {
            Frame::Probe(p) => p.wire_len(),
            Frame::Completion(_) => COMPLETION_LEN,
            Frame::Report(_) => REPORT_LEN,
        }
    }
}

impl From<ProbeFrame> for Frame {
    fn from(f: ProbeFrame) -> Self {
        Frame::Probe(f)
    }
}

impl From<CompletionFrame> for Frame {
    fn from(f: CompletionFrame) -> Self {
        Frame::Completion(f)
    }
}

impl From<ReportFrame> for Frame {
    fn from(f: ReportFrame) -> Self {
        Frame::Report(f)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("probe payload of {len} bytes exceeds the {MAX_PAYLOAD}-byte limit")]
    PayloadTooLarge { len: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("skipped {skipped} bytes without a frame magic")]
    BadMagic { skipped: usize },
    #[error("unknown frame type 0x{ty:02x}")]
    UnknownType { ty: u8 },
    #[error("declared payload of {len} bytes exceeds the limit")]
    PayloadTooLarge { len: u32 },
    #[error("frame truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("{extra} trailing bytes after the frame")]
    TrailingBytes { extra: usize },
}

/// Appends the encoding of `frame` to `out`.
pub fn encode_into(frame: &Frame, out: &mut Vec<u8>) -> Result<(), EncodeError> {
    match frame {
        Frame::Probe(p) => {
            let len = p.payload.len();
            if len > MAX_PAYLOAD as usize {
                return Err(EncodeError::PayloadTooLarge { len });
            }
            out.reserve(PROBE_HEADER_LEN + len);
            out.extend_from_slice(&MAGIC);
            out.push(TYPE_PROBE);
            out.extend_from_slice(&p.tab_total_bytes.to_be_bytes());
            out.extend_from_slice(&(len as u32).to_be_bytes());
            out.extend_from_slice(&p.payload);
        }
        Frame::Completion(c) => {
            out.extend_from_slice(&MAGIC);
            out.push(TYPE_COMPLETION);
            out.extend_from_slice(&c.tab_total_bytes.to_be_bytes());
        }
        Frame::Report(r) => {
            out.extend_from_slice(&MAGIC);
            out.push(TYPE_REPORT);
            out.extend_from_slice(&r.uavg_bps.to_be_bytes());
            out.extend_from_slice(&r.sample_count.to_be_bytes());
        }
    }
    Ok(())
}

pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, EncodeError> {
    let mut out = Vec::with_capacity(frame.wire_len());
    encode_into(frame, &mut out)?;
    Ok(out)
}

enum Parse {
    Frame(Frame, usize),
    /// Need more bytes.
    Incomplete(usize),
    /// Malformed header at the front; skip one byte and rescan.
    Malformed(DecodeError),
}

fn be_u64(b: &[u8]) -> u64 {
    u64::from_be_bytes(b[..8].try_into().unwrap())
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes(b[..4].try_into().unwrap())
}

/// Parses one frame from a buffer that begins with the magic.
fn parse_at_magic(buf: &[u8]) -> Parse {
    debug_assert!(buf.starts_with(&MAGIC));
    let Some(&ty) = buf.get(4) else {
        return Parse::Incomplete(5);
    };
    match ty {
        TYPE_PROBE => {
            if buf.len() < PROBE_HEADER_LEN {
                return Parse::Incomplete(PROBE_HEADER_LEN);
            }
            let len = be_u32(&buf[13..]);
            if len > MAX_PAYLOAD {
                return Parse::Malformed(DecodeError::PayloadTooLarge { len });
            }
            let total = PROBE_HEADER_LEN + len as usize;
            if buf.len() < total {
                return Parse::Incomplete(total);
            }
            let frame = ProbeFrame {
                tab_total_bytes: be_u64(&buf[5..]),
                payload: Bytes::copy_from_slice(&buf[PROBE_HEADER_LEN..total]),
            };
            Parse::Frame(Frame::Probe(frame), total)
        }
        TYPE_COMPLETION => {
            if buf.len() < COMPLETION_LEN {
                return Parse::Incomplete(COMPLETION_LEN);
            }
            let frame = CompletionFrame {
                tab_total_bytes: be_u64(&buf[5..]),
            };
            Parse::Frame(Frame::Completion(frame), COMPLETION_LEN)
        }
        TYPE_REPORT => {
            if buf.len() < REPORT_LEN {
                return Parse::Incomplete(REPORT_LEN);
            }
            let frame = ReportFrame {
                uavg_bps: be_u64(&buf[5..]),
                sample_count: be_u32(&buf[13..]),
            };
            Parse::Frame(Frame::Report(frame), REPORT_LEN)
        }
        ty => Parse::Malformed(DecodeError::UnknownType { ty }),
    }
}

/// Position of the first full magic, or of a trailing partial magic that
/// could complete once more bytes arrive.
fn scan_magic(buf: &[u8]) -> Option<usize> {
    (0..buf.len()).find(|&i| {
        let rest = &buf[i..];
        if rest.len() >= MAGIC.len() {
            rest[..MAGIC.len()] == MAGIC
        } else {
            MAGIC.starts_with(rest)
        }
    })
}

/// Consumes complete frames from the front of `buffer`.
///
/// Returns the decoded frames (malformed ones reported in place) and the
/// unconsumed suffix, which is either empty or the beginning of a frame
/// that has not fully arrived yet.
pub fn decode_stream(buffer: &[u8]) -> (Vec<Result<Frame, DecodeError>>, &[u8]) {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < buffer.len() {
        let rest = &buffer[pos..];
        match scan_magic(rest) {
            None => {
                out.push(Err(DecodeError::BadMagic {
                    skipped: rest.len(),
                }));
                pos = buffer.len();
            }
            Some(skip) if skip > 0 => {
                out.push(Err(DecodeError::BadMagic { skipped: skip }));
                pos += skip;
            }
            Some(_) => {
                if rest.len() < MAGIC.len() {
                    break;
                }
                match parse_at_magic(rest) {
                    Parse::Frame(frame, used) => {
                        out.push(Ok(frame));
                        pos += used;
                    }
                    Parse::Incomplete(_) => break,
                    Parse::Malformed(e) => {
                        out.push(Err(e));
                        pos += 1;
                    }
                }
            }
        }
    }
    (out, &buffer[pos..])
}

/// Decodes a datagram that must hold exactly one frame.
pub fn decode_datagram(datagram: &[u8]) -> Result<Frame, DecodeError> {
    if !datagram.starts_with(&MAGIC) {
        if MAGIC.starts_with(datagram) {
            return Err(DecodeError::Truncated {
                needed: MAGIC.len(),
                available: datagram.len(),
            });
        }
        return Err(DecodeError::BadMagic {
            skipped: datagram.len(),
        });
    }
    match parse_at_magic(datagram) {
        Parse::Frame(frame, used) if used == datagram.len() => Ok(frame),
        Parse::Frame(_, used) => Err(DecodeError::TrailingBytes {
            extra: datagram.len() - used,
        }),
        Parse::Incomplete(needed) => Err(DecodeError::Truncated {
            needed,
            available: datagram.len(),
        }),
        Parse::Malformed(e) => Err(e),
    }
}

/// Incremental decoder for stream transports.
#[derive(Debug, Default)]
pub struct StreamDecoder {
    buf: Vec<u8>,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `chunk` and returns every frame completed by it.
    pub fn push(&mut self, chunk: &[u8]) -> Vec<Result<Frame, DecodeError>> {
        self.buf.extend_from_slice(chunk);
        let (frames, residual) = decode_stream(&self.buf);
        let consumed = self.buf.len() - residual.len();
        self.buf.drain(..consumed);
        frames
    }

    /// Bytes held back waiting for the rest of a frame.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }
}
