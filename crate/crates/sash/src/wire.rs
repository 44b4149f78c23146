//! Message types and their byte encoding.
//!
//! Every message that crosses the simulated network is serialized through
//! this module, so transcript byte counts are the exact size a real
//! transport would carry. The encoding is a tag byte followed by fixed
//! little-endian fields; vectors carry a u32 count prefix. Share material
//! travels as opaque byte strings produced by the secret-sharing layer.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("message truncated")]
    Truncated,
    #[error("unknown message tag {0}")]
    UnknownTag(u8),
    #[error("bad field encoding: {0}")]
    BadField(&'static str),
    #[error("trailing bytes after message")]
    TrailingBytes,
}

/// Everything any party sends in any protocol mode.
///
/// Client to server: `AdvertiseKeys`, `EncryptedShares`, `MaskedInput`,
/// `UnmaskingShares`. Server to client: `Roster`, `ShareBundle`,
/// `SurvivorSets`, `ResultBroadcast`.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    /// Round 0 upload: key-agreement public key and channel public key.
    AdvertiseKeys { ka_pk: [u8; 32], enc_pk: [u8; 32] },
    /// Round 1 upload: one encrypted share addressed to a peer, routed
    /// through the server.
    EncryptedShares { recipient: u32, ciphertext: Vec<u8> },
    /// A masked vector mod 2^(8*width). Width 4 carries mod-p updates,
    /// width 8 carries mod-q key material.
    MaskedInput { width: u8, values: Vec<u64> },
    /// Unmasking round upload: self-mask shares for online peers and
    /// channel-secret shares for dropped peers. Each entry is (owner id,
    /// encoded share).
    UnmaskingShares {
        online_shares: Vec<(u32, Vec<u8>)>,
        dropped_shares: Vec<(u32, Vec<u8>)>,
    },
    /// Server broadcast after round 0: every advertised key set.
    Roster { entries: Vec<RosterEntry> },
    /// Server forwarding of round-1 shares to one recipient: (owner id,
    /// ciphertext) pairs.
    ShareBundle { shares: Vec<(u32, Vec<u8>)> },
    /// Server broadcast before unmasking: who is online, who needs
    /// recovery.
    SurvivorSets { online: Vec<u32>, dropped: Vec<u32> },
    /// Server broadcast of the aggregated result.
    ResultBroadcast { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RosterEntry {
    pub client: u32,
    pub ka_pk: [u8; 32],
    pub enc_pk: [u8; 32],
}

const TAG_ADVERTISE: u8 = 1;
const TAG_ENC_SHARES: u8 = 2;
const TAG_MASKED: u8 = 3;
const TAG_UNMASKING: u8 = 4;
const TAG_ROSTER: u8 = 5;
const TAG_BUNDLE: u8 = 6;
const TAG_SURVIVORS: u8 = 7;
const TAG_RESULT: u8 = 8;

impl Message {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Message::AdvertiseKeys { ka_pk, enc_pk } => {
                out.push(TAG_ADVERTISE);
                out.extend_from_slice(ka_pk);
                out.extend_from_slice(enc_pk);
            }
            Message::EncryptedShares {
                recipient,
                ciphertext,
            } => {
                out.push(TAG_ENC_SHARES);
                out.extend_from_slice(&recipient.to_le_bytes());
                put_bytes(&mut out, ciphertext);
            }
            Message::MaskedInput { width, values } => {
                out.push(TAG_MASKED);
                out.push(*width);
                out.extend_from_slice(&(values.len() as u32).to_le_bytes());
                let w = *width as usize;
                for v in values {
                    out.extend_from_slice(&v.to_le_bytes()[..w]);
                }
            }
            Message::UnmaskingShares {
                online_shares,
                dropped_shares,
            } => {
                out.push(TAG_UNMASKING);
                put_share_list(&mut out, online_shares);
                put_share_list(&mut out, dropped_shares);
            }
            Message::Roster { entries } => {
                out.push(TAG_ROSTER);
                out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
                for e in entries {
                    out.extend_from_slice(&e.client.to_le_bytes());
                    out.extend_from_slice(&e.ka_pk);
                    out.extend_from_slice(&e.enc_pk);
                }
            }
            Message::ShareBundle { shares } => {
                out.push(TAG_BUNDLE);
                put_share_list(&mut out, shares);
            }
            Message::SurvivorSets { online, dropped } => {
                out.push(TAG_SURVIVORS);
                put_id_list(&mut out, online);
                put_id_list(&mut out, dropped);
            }
            Message::ResultBroadcast { values } => {
                out.push(TAG_RESULT);
                out.extend_from_slice(&(values.len() as u32).to_le_bytes());
                for v in values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Message, WireError> {
        let mut r = Reader { bytes, pos: 0 };
        let tag = r.u8()?;
        let msg = match tag {
            TAG_ADVERTISE => Message::AdvertiseKeys {
                ka_pk: r.array32()?,
                enc_pk: r.array32()?,
            },
            TAG_ENC_SHARES => Message::EncryptedShares {
                recipient: r.u32()?,
                ciphertext: r.bytes_prefixed()?,
            },
            TAG_MASKED => {
                let width = r.u8()?;
                if width == 0 || width > 8 {
                    return Err(WireError::BadField("masked input width"));
                }
                let count = r.u32()? as usize;
                let mut values = Vec::with_capacity(count);
                for _ in 0..count {
                    let raw = r.take(width as usize)?;
                    let mut buf = [0u8; 8];
                    buf[..raw.len()].copy_from_slice(raw);
                    values.push(u64::from_le_bytes(buf));
                }
                Message::MaskedInput { width, values }
            }
            TAG_UNMASKING => Message::UnmaskingShares {
                online_shares: get_share_list(&mut r)?,
                dropped_shares: get_share_list(&mut r)?,
            },
            TAG_ROSTER => {
                let count = r.u32()? as usize;
                let mut entries = Vec::with_capacity(count);
                for _ in 0..count {
                    entries.push(RosterEntry {
                        client: r.u32()?,
                        ka_pk: r.array32()?,
                        enc_pk: r.array32()?,
                    });
                }
                Message::Roster { entries }
            }
            TAG_BUNDLE => Message::ShareBundle {
                shares: get_share_list(&mut r)?,
            },
            TAG_SURVIVORS => Message::SurvivorSets {
                online: get_id_list(&mut r)?,
                dropped: get_id_list(&mut r)?,
            },
            TAG_RESULT => {
                let count = r.u32()? as usize;
                let mut values = Vec::with_capacity(count);
                for _ in 0..count {
                    values.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
                }
                Message::ResultBroadcast { values }
            }
            other => return Err(WireError::UnknownTag(other)),
        };
        if r.pos != bytes.len() {
            return Err(WireError::TrailingBytes);
        }
        Ok(msg)
    }

    /// Serialized size without building the buffer. Used by tests to pin
    /// the byte accounting.
    pub fn encoded_len(&self) -> usize {
        self.encode().len()
    }
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

fn put_share_list(out: &mut Vec<u8>, shares: &[(u32, Vec<u8>)]) {
    out.extend_from_slice(&(shares.len() as u32).to_le_bytes());
    for (owner, blob) in shares {
        out.extend_from_slice(&owner.to_le_bytes());
        put_bytes(out, blob);
    }
}

fn put_id_list(out: &mut Vec<u8>, ids: &[u32]) {
    out.extend_from_slice(&(ids.len() as u32).to_le_bytes());
    for id in ids {
        out.extend_from_slice(&id.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.pos + n > self.bytes.len() {
            return Err(WireError::Truncated);
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn array32(&mut self) -> Result<[u8; 32], WireError> {
        Ok(self.take(32)?.try_into().unwrap())
    }

    fn bytes_prefixed(&mut self) -> Result<Vec<u8>, WireError> {
        let len = self.u32()? as usize;
        Ok(self.take(len)?.to_vec())
    }
}

fn get_share_list(r: &mut Reader) -> Result<Vec<(u32, Vec<u8>)>, WireError> {
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let owner = r.u32()?;
        let blob = r.bytes_prefixed()?;
        out.push((owner, blob));
    }
    Ok(out)
}

fn get_id_list(r: &mut Reader) -> Result<Vec<u32>, WireError> {
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(r.u32()?);
    }
    Ok(out)
}
