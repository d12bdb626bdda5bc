//! Interest and Data packets and their fixed-overhead wire form.
//!
//! Both packet kinds use a fixed header followed by the length-prefixed name
//! components: 32 header bytes for an Interest and 48 for a Data (plus the
//! payload). The resulting sizes drive airtime on the wireless channel.

use std::rc::Rc;

use crate::error::{NameError, WireError};
use crate::kernel::SimTime;
use crate::ndn::Name;

pub const INTEREST_HEADER_LEN: usize = 32;
pub const DATA_HEADER_LEN: usize = 48;
/// Payload carried by every Data in scenario traffic.
pub const DATA_PAYLOAD_LEN: u32 = 1024;

const TYPE_INTEREST: u8 = 0x05;
const TYPE_DATA: u8 = 0x06;
const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interest {
    pub name: Name,
    pub nonce: u32,
    pub lifetime: SimTime,
    pub hop_count: u8,
}

impl Interest {
    pub fn new(name: Name, nonce: u32, lifetime: SimTime) -> Self {
        Interest {
            name,
            nonce,
            lifetime,
            hop_count: 0,
        }
    }

    pub fn wire_len(&self) -> usize {
        INTEREST_HEADER_LEN + self.name.wire_len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Data {
    pub name: Name,
    pub payload_len: u32,
}

impl Data {
    pub fn new(name: Name) -> Self {
        Data {
            name,
            payload_len: DATA_PAYLOAD_LEN,
        }
    }

    pub fn wire_len(&self) -> usize {
        DATA_HEADER_LEN + self.name.wire_len() + self.payload_len as usize
    }
}

/// Either packet kind, shared cheaply between the receivers of a broadcast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Interest(Rc<Interest>),
    Data(Rc<Data>),
}

impl Packet {
    pub fn name(&self) -> &Name {
        match self {
            Packet::Interest(i) => &i.name,
            Packet::Data(d) => &d.name,
        }
    }

    pub fn wire_len(&self) -> usize {
        match self {
            Packet::Interest(i) => i.wire_len(),
            Packet::Data(d) => d.wire_len(),
        }
    }

    pub fn is_interest(&self) -> bool {
        matches!(self, Packet::Interest(_))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.wire_len());
        self.encode_into(&mut buf);
        buf
    }

    pub fn encode_into(&self, buf: &mut Vec<u8>) {
        let start = buf.len();
        let total = self.wire_len() as u32;
        let name = self.name();
        match self {
            Packet::Interest(i) => {
                buf.push(TYPE_INTEREST);
                buf.push(VERSION);
                buf.extend_from_slice(&(name.wire_len() as u16).to_be_bytes());
                buf.extend_from_slice(&total.to_be_bytes());
                buf.extend_from_slice(&i.nonce.to_be_bytes());
                let lifetime_us = (i.lifetime.as_nanos() / 1_000).min(u32::MAX as u64) as u32;
                buf.extend_from_slice(&lifetime_us.to_be_bytes());
                buf.push(i.hop_count);
                buf.resize(start + INTEREST_HEADER_LEN, 0);
                name.encode_into(buf);
            }
            Packet::Data(d) => {
                buf.push(TYPE_DATA);
                buf.push(VERSION);
                buf.extend_from_slice(&(name.wire_len() as u16).to_be_bytes());
                buf.extend_from_slice(&total.to_be_bytes());
                buf.extend_from_slice(&d.payload_len.to_be_bytes());
                buf.resize(start + DATA_HEADER_LEN, 0);
                name.encode_into(buf);
                buf.resize(buf.len() + d.payload_len as usize, 0);
            }
        }
        debug_assert_eq!(buf.len() - start, total as usize);
    }

    pub fn decode(bytes: &[u8]) -> Result<Packet, WireError> {
        let need = |n: usize| {
            if bytes.len() < n {
                Err(WireError::Truncated {
                    need: n,
                    have: bytes.len(),
                })
            } else {
                Ok(())
            }
        };
        need(8)?;
        if bytes[1] != VERSION {
            return Err(WireError::Malformed("version"));
        }
        let name_len = u16::from_be_bytes([bytes[2], bytes[3]]) as usize;
        let total = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
        need(total)?;
        if bytes.len() != total {
            return Err(WireError::Malformed("length"));
        }
        let u32_at = |at: usize| u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap());
        match bytes[0] {
            TYPE_INTEREST => {
                need(INTEREST_HEADER_LEN + name_len)?;
                if total != INTEREST_HEADER_LEN + name_len {
                    return Err(WireError::Malformed("interest length"));
                }
                let name = decode_name(&bytes[INTEREST_HEADER_LEN..])?;
                Ok(Packet::Interest(Rc::new(Interest {
                    name,
                    nonce: u32_at(8),
                    lifetime: SimTime::from_micros(u32_at(12) as u64),
                    hop_count: bytes[16],
                })))
            }
            TYPE_DATA => {
                let payload_len = u32_at(8);
                if total != DATA_HEADER_LEN + name_len + payload_len as usize {
                    return Err(WireError::Malformed("data length"));
                }
                let name = decode_name(&bytes[DATA_HEADER_LEN..DATA_HEADER_LEN + name_len])?;
                Ok(Packet::Data(Rc::new(Data { name, payload_len })))
            }
            other => Err(WireError::UnknownType(other)),
        }
    }
}

fn decode_name(bytes: &[u8]) -> Result<Name, WireError> {
    let name = Name::decode(bytes)?;
    if name.is_root() {
        return Err(NameError::Empty.into());
    }
    Ok(name)
}

impl From<Interest> for Packet {
    fn from(i: Interest) -> Self {
        Packet::Interest(Rc::new(i))
    }
}

impl From<Data> for Packet {
    fn from(d: Data) -> Self {
        Packet::Data(Rc::new(d))
    }
}
