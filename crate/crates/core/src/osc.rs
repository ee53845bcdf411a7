//! OSC 1.0 binary packets: messages with int32, float32 and string
//! arguments, and (nested) bundles.

use thiserror::Error;

const BUNDLE_TAG: &[u8; 8] = b"#bundle\0";
const MAX_DEPTH: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OscError {
    #[error("packet truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("packet length {len} is not a multiple of 4")]
    Unaligned { len: usize },
    #[error("nonzero padding at byte {offset}")]
    BadPadding { offset: usize },
    #[error("string at byte {offset} is not valid UTF-8")]
    BadString { offset: usize },
    #[error("address at byte {offset} does not start with '/'")]
    BadAddress { offset: usize },
    #[error("type tag string at byte {offset} does not start with ','")]
    BadTypeTags { offset: usize },
    #[error("unknown type tag {tag:?} at byte {offset}")]
    UnknownTag { tag: char, offset: usize },
    #[error("bad bundle element size {size} at byte {offset}")]
    BadElementSize { size: i32, offset: usize },
    #[error("bundles nested deeper than {MAX_DEPTH} at byte {offset}")]
    TooDeep { offset: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum OscArg {
    Int(i32),
    Float(f32),
    Str(String),
}

impl OscArg {
    fn tag(&self) -> char {
        match self {
            OscArg::Int(_) => 'i',
            OscArg::Float(_) => 'f',
            OscArg::Str(_) => 's',
        }
    }

    pub fn as_int(&self) -> Option<i32> {
        match self {
            OscArg::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_float(&self) -> Option<f32> {
        match self {
            OscArg::Float(v) => Some(*v),
            OscArg::Int(v) => Some(*v as f32),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            OscArg::Str(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscMessage {
    pub address: String,
    pub args: Vec<OscArg>,
}

impl OscMessage {
    pub fn new(address: impl Into<String>, args: Vec<OscArg>) -> Self {
        Self {
            address: address.into(),
            args,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OscPacket {
    Message(OscMessage),
    Bundle { timetag: u64, elements: Vec<OscPacket> },
}

impl OscPacket {
    /// All messages in depth-first order.
    pub fn into_messages(self) -> Vec<OscMessage> {
        let mut out = Vec::new();
        self.flatten_into(&mut out);
        out
    }

    fn flatten_into(self, out: &mut Vec<OscMessage>) {
        match self {
            OscPacket::Message(m) => out.push(m),
            OscPacket::Bundle { elements, .. } => {
                for e in elements {
                    e.flatten_into(out);
                }
            }
        }
    }
}

fn write_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(s.as_bytes());
    buf.push(0);
    while !buf.len().is_multiple_of(4) {
        buf.push(0);
    }
}

pub fn encode_message(m: &OscMessage) -> Vec<u8> {
    let mut buf = Vec::new();
    write_str(&mut buf, &m.address);
    let tags: String = std::iter::once(',').chain(m.args.iter().map(OscArg::tag)).collect();
    write_str(&mut buf, &tags);
    for a in &m.args {
        match a {
            OscArg::Int(v) => buf.extend_from_slice(&v.to_be_bytes()),
            OscArg::Float(v) => buf.extend_from_slice(&v.to_be_bytes()),
            OscArg::Str(s) => write_str(&mut buf, s),
        }
    }
    buf
}

pub fn encode_packet(p: &OscPacket) -> Vec<u8> {
    match p {
        OscPacket::Message(m) => encode_message(m),
        OscPacket::Bundle { timetag, elements } => {
            let mut buf = BUNDLE_TAG.to_vec();
            buf.extend_from_slice(&timetag.to_be_bytes());
            for e in elements {
                let bytes = encode_packet(e);
                buf.extend_from_slice(&(bytes.len() as i32).to_be_bytes());
                buf.extend_from_slice(&bytes);
            }
            buf
        }
    }
}

/// Immediate-execution time tag.
pub const IMMEDIATELY: u64 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Offset of `bytes[0]` in the outermost packet, for error messages.
    base: usize,
}

impl<'a> Reader<'a> {
    fn at(&self) -> usize {
        self.base + self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], OscError> {
        if self.bytes.len() - self.pos < n {
            return Err(OscError::Truncated { offset: self.at() });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn word(&mut self) -> Result<[u8; 4], OscError> {
        Ok(self.take(4)?.try_into().expect("four bytes"))
    }

    fn string(&mut self) -> Result<String, OscError> {
        let start = self.at();
        let rest = &self.bytes[self.pos..];
        let nul = rest
            .iter()
            .position(|&b| b == 0)
            .ok_or(OscError::Truncated { offset: start })?;
        let padded = (nul + 4) & !3;
        if padded > rest.len() {
            return Err(OscError::Truncated { offset: start });
        }
        if let Some(i) = rest[nul..padded].iter().position(|&b| b != 0) {
            return Err(OscError::BadPadding { offset: start + nul + i });
        }
        let s = std::str::from_utf8(&rest[..nul]).map_err(|_| OscError::BadString { offset: start })?;
        self.pos += padded;
        Ok(s.to_string())
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn decode_at(bytes: &[u8], base: usize, depth: usize) -> Result<OscPacket, OscError> {
    if !bytes.len().is_multiple_of(4) {
        return Err(OscError::Unaligned { len: bytes.len() });
    }
    let mut r = Reader { bytes, pos: 0, base };
    if bytes.starts_with(BUNDLE_TAG) {
        if depth >= MAX_DEPTH {
            return Err(OscError::TooDeep { offset: base });
        }
        r.take(8)?;
        let timetag = u64::from_be_bytes(r.take(8)?.try_into().expect("eight bytes"));
        let mut elements = Vec::new();
        while !r.done() {
            let offset = r.at();
            let size = i32::from_be_bytes(r.word()?);
            if size <= 0 || size % 4 != 0 || size as usize > bytes.len() - r.pos {
                return Err(OscError::BadElementSize { size, offset });
            }
            let start = r.pos;
            let body = r.take(size as usize)?;
            elements.push(decode_at(body, base + start, depth + 1)?);
        }
        return Ok(OscPacket::Bundle { timetag, elements });
    }

    let addr_at = r.at();
    let address = r.string()?;
    if !address.starts_with('/') {
        return Err(OscError::BadAddress { offset: addr_at });
    }
    let mut args = Vec::new();
    if !r.done() {
        let tags_at = r.at();
        let tags = r.string()?;
        let mut chars = tags.chars();
        if chars.next() != Some(',') {
            return Err(OscError::BadTypeTags { offset: tags_at });
        }
        for tag in chars {
            let offset = r.at();
            args.push(match tag {
                'i' => OscArg::Int(i32::from_be_bytes(r.word()?)),
                'f' => OscArg::Float(f32::from_be_bytes(r.word()?)),
                's' => OscArg::Str(r.string()?),
                _ => return Err(OscError::UnknownTag { tag, offset }),
            });
        }
        if !r.done() {
            return Err(OscError::Truncated { offset: r.at() });
        }
    }
    Ok(OscPacket::Message(OscMessage { address, args }))
}

pub fn decode_packet(bytes: &[u8]) -> Result<OscPacket, OscError> {
    decode_at(bytes, 0, 0)
}

/// Decodes a datagram and flattens any bundles into their messages.
pub fn parse_packet(bytes: &[u8]) -> Result<Vec<OscMessage>, OscError> {
    Ok(decode_packet(bytes)?.into_messages())
}
