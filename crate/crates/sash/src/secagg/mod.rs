//! Double-masked secure aggregation with dropout recovery.
//!
//! The engine is generic over vector length L and power-of-two modulus R.
//! Instantiated with (L = mu, R = q) it agrees on a masking-key sum for
//! the outer protocol; with (L = M, R = p) it is the baseline aggregator
//! the benchmarks compare against.
//!
//! Four client rounds, one global phase each:
//!
//!   round 0  AdvertiseKeys    client publishes DH public keys
//!   round 1  EncryptedShares  client threshold-shares its self-mask seed
//!                             and its DH secret to every peer, sealed
//!                             end-to-end under the pair's transport key
//!   round 2  MaskedInput      client uploads x + PRG(b) +- pairwise masks
//!   round 3  UnmaskingShares  survivors reveal b-shares of online peers
//!                             and DH-secret shares of dropped peers
//!
//! The server sums the masked inputs of clients that are still online at
//! round 3, subtracts each survivor's PRG(b), and cancels the pairwise
//! masks that dropped clients left dangling by reconstructing their DH
//! secrets. A client whose masked input arrived but who fell over before
//! round 3 is treated as dropped: its upload is discarded and its
//! pairwise masks are reconstructed, so the sum covers exactly the final
//! online set. The server never learns both the self-mask seed and the
//! DH secret of the same client.

pub mod field;
pub mod ka;
pub mod prg;
pub mod shamir;

use std::collections::{BTreeMap, BTreeSet};

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;
use x25519_dalek::{PublicKey, StaticSecret};

use crate::simnet::{ClientId, DropoutSchedule, Envelope, Party, RoundTranscript, SimNet, TranscriptMeta};
use crate::wire::{Message, RosterEntry};

pub use ka::{enc_key, ka_agree, ka_gen, KaKeyPair};
pub use prg::{prg_expand, PRG_SEED_LEN};
pub use shamir::{shamir_reconstruct, shamir_share, shamir_share_at, ShamirError, ShamirShare};

#[derive(Debug, Error)]
pub enum SecAggError {
    #[error("bad config: {0}")]
    BadConfig(&'static str),
    #[error("malformed input vector for client {0}")]
    BadInput(ClientId),
    #[error("no pairwise seed for live peer {0}")]
    MissingPairwiseSeed(ClientId),
    #[error("round unrecoverable: {live} live share holders, threshold {threshold}")]
    Unrecoverable { live: usize, threshold: usize },
    #[error("key agreement produced a degenerate shared secret")]
    DegenerateKey,
    #[error(transparent)]
    Shamir(#[from] ShamirError),
    #[error("corrupted run: {0}")]
    Corruption(String),
}

/// Engine parameters. The PRG seed length is fixed at 16 bytes
/// ([`PRG_SEED_LEN`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecAggConfig {
    pub n: usize,
    pub threshold: usize,
    pub vec_len: usize,
    /// R = 2^modulus_log2.
    pub modulus_log2: u32,
}

impl SecAggConfig {
    /// Default threshold floor(2n/3) + 1: tolerates collusion of up to
    /// floor(2n/3) clients and recovers as long as that many stay online.
    pub fn default_threshold(n: usize) -> usize {
        2 * n / 3 + 1
    }

    pub fn new(n: usize, vec_len: usize, modulus_log2: u32) -> Self {
        SecAggConfig {
            n,
            threshold: Self::default_threshold(n),
            vec_len,
            modulus_log2,
        }
    }

    pub fn with_threshold(mut self, threshold: usize) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn validate(&self) -> Result<(), SecAggError> {
        if self.n < 2 {
            return Err(SecAggError::BadConfig("need at least two clients"));
        }
        if self.threshold <= 1 || self.threshold > self.n {
            return Err(SecAggError::BadConfig("need 1 < threshold <= n"));
        }
        if self.vec_len == 0 {
            return Err(SecAggError::BadConfig("empty vectors"));
        }
        if self.modulus_log2 == 0 || self.modulus_log2 > 64 {
            return Err(SecAggError::BadConfig("modulus_log2 must be in 1..=64"));
        }
        Ok(())
    }

    #[inline]
    pub fn modulus_mask(&self) -> u64 {
        prg::modulus_mask(self.modulus_log2)
    }

    /// Bytes per residue on the wire.
    #[inline]
    pub fn residue_width(&self) -> u8 {
        self.modulus_log2.div_ceil(8) as u8
    }
}

#[inline]
fn add_assign(acc: &mut [u64], v: &[u64], mask: u64) {
    for (a, b) in acc.iter_mut().zip(v.iter()) {
        *a = a.wrapping_add(*b) & mask;
    }
}

#[inline]
fn sub_assign(acc: &mut [u64], v: &[u64], mask: u64) {
    for (a, b) in acc.iter_mut().zip(v.iter()) {
        *a = a.wrapping_sub(*b) & mask;
    }
}

/// y_u = x_u + PRG(b_u) + sum_{v < u} PRG(s_uv) - sum_{v > u} PRG(s_uv)
/// over the live peer set, everything mod R. The sign convention is the
/// global numeric order on client ids, so each pair's contributions
/// cancel when both ends survive.
pub fn client_mask_input(
    x: &[u64],
    b_seed: &[u8; PRG_SEED_LEN],
    pairwise: &BTreeMap<ClientId, [u8; PRG_SEED_LEN]>,
    live_peers: &BTreeSet<ClientId>,
    self_id: ClientId,
    cfg: &SecAggConfig,
) -> Result<Vec<u64>, SecAggError> {
    let mask = cfg.modulus_mask();
    if x.len() != cfg.vec_len || x.iter().any(|&e| e & !mask != 0) {
        return Err(SecAggError::BadInput(self_id));
    }
    if live_peers.contains(&self_id) {
        return Err(SecAggError::BadConfig("live peer set contains self"));
    }
    let mut y = x.to_vec();
    let mut scratch = vec![0u64; cfg.vec_len];
    prg::prg_expand_into(b_seed, cfg.modulus_log2, &mut scratch);
    add_assign(&mut y, &scratch, mask);
    for &v in live_peers {
        let seed = pairwise
            .get(&v)
            .ok_or(SecAggError::MissingPairwiseSeed(v))?;
        prg::prg_expand_into(seed, cfg.modulus_log2, &mut scratch);
        if v < self_id {
            add_assign(&mut y, &scratch, mask);
        } else {
            sub_assign(&mut y, &scratch, mask);
        }
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecAggOutcome {
    /// Sum over `survivors` mod R.
    pub sum: Vec<u64>,
    /// Clients whose upload made it into the sum.
    pub survivors: BTreeSet<ClientId>,
    /// Share-round participants whose pairwise masks had to be
    /// reconstructed instead.
    pub dropped: BTreeSet<ClientId>,
}

struct ClientState {
    rng: ChaCha20Rng,
    ka: KaKeyPair,
    enc: KaKeyPair,
    b_seed: [u8; PRG_SEED_LEN],
    /// Key roster as received from the server (round 0 broadcast):
    /// client -> (mask KA public key, share-transport public key).
    roster: BTreeMap<ClientId, ([u8; 32], [u8; 32])>,
    /// Shares this client holds: owner -> (b share, DH-secret share).
    held: BTreeMap<ClientId, (ShamirShare, ShamirShare)>,
    /// Transport keys derived so far; sealing and opening share a key,
    /// so each pair costs one exchange.
    transport: BTreeMap<ClientId, [u8; 32]>,
}

impl ClientState {
    /// Cipher sealing share traffic between this client and `peer`.
    fn transport_cipher(&mut self, peer: ClientId) -> Result<ChaCha20Poly1305, SecAggError> {
        if let Some(key) = self.transport.get(&peer) {
            return Ok(ChaCha20Poly1305::new(Key::from_slice(key)));
        }
        let (_, enc_pk) = self
            .roster
            .get(&peer)
            .ok_or(SecAggError::MissingPairwiseSeed(peer))?;
        let key = enc_key(&self.enc.secret, &PublicKey::from(*enc_pk))?;
        self.transport.insert(peer, key);
        Ok(ChaCha20Poly1305::new(Key::from_slice(&key)))
    }
}

/// Per-direction nonce. Transport keys are fresh every run and each
/// ordered pair encrypts exactly one message, so ids alone suffice.
fn share_nonce(owner: ClientId, recipient: ClientId) -> Nonce {
    let mut n = [0u8; 12];
    n[..4].copy_from_slice(&owner.to_le_bytes());
    n[4..8].copy_from_slice(&recipient.to_le_bytes());
    n.into()
}

fn party_rng(run_seed: &[u8; 32], id: ClientId) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"client-rng");
    hasher.update(run_seed);
    hasher.update(id.to_le_bytes());
    ChaCha20Rng::from_seed(hasher.finalize().into())
}

fn encode_share_pair(b: &ShamirShare, sk: &ShamirShare) -> Vec<u8> {
    let bb = b.to_bytes();
    let sb = sk.to_bytes();
    let mut out = Vec::with_capacity(8 + bb.len() + sb.len());
    out.extend_from_slice(&(bb.len() as u32).to_le_bytes());
    out.extend_from_slice(&bb);
    out.extend_from_slice(&(sb.len() as u32).to_le_bytes());
    out.extend_from_slice(&sb);
    out
}

fn decode_share_pair(blob: &[u8]) -> Result<(ShamirShare, ShamirShare), SecAggError> {
    let fail = || SecAggError::Corruption("malformed share pair".into());
    let take = |bytes: &[u8], at: usize| -> Result<(usize, usize), SecAggError> {
        if at + 4 > bytes.len() {
            return Err(fail());
        }
        let len = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        if at + 4 + len > bytes.len() {
            return Err(fail());
        }
        Ok((at + 4, len))
    };
    let (start, len) = take(blob, 0)?;
    let b = ShamirShare::from_bytes(&blob[start..start + len]).map_err(|_| fail())?;
    let (start2, len2) = take(blob, start + len)?;
    if start2 + len2 != blob.len() {
        return Err(fail());
    }
    let sk = ShamirShare::from_bytes(&blob[start2..start2 + len2]).map_err(|_| fail())?;
    Ok((b, sk))
}

/// Runs the four rounds over the supplied transport. The net's current
/// phase on entry is round 0; four phases are consumed. Party randomness
/// derives from `run_seed`, so identical arguments replay identical
/// transcripts.
pub fn run_secagg(
    inputs: &BTreeMap<ClientId, Vec<u64>>,
    cfg: &SecAggConfig,
    net: &mut SimNet,
    run_seed: [u8; 32],
) -> Result<SecAggOutcome, SecAggError> {
    cfg.validate()?;
    if inputs.len() != cfg.n {
        return Err(SecAggError::BadConfig("input count differs from cfg.n"));
    }
    let mask = cfg.modulus_mask();
    for (&id, v) in inputs {
        if v.len() != cfg.vec_len || v.iter().any(|&e| e & !mask != 0) {
            return Err(SecAggError::BadInput(id));
        }
    }
    let width = cfg.residue_width();

    // Round 0: advertise keys.
    let mut states: BTreeMap<ClientId, ClientState> = BTreeMap::new();
    let mut outgoing = Vec::new();
    for &id in inputs.keys() {
        if !net.is_live_now(id) {
            continue;
        }
        let state = net.compute(Party::Client(id), "advertise", || {
            let mut rng = party_rng(&run_seed, id);
            let ka = ka_gen(&mut rng);
            let enc = ka_gen(&mut rng);
            let mut b_seed = [0u8; PRG_SEED_LEN];
            rng.fill_bytes(&mut b_seed);
            ClientState {
                rng,
                ka,
                enc,
                b_seed,
                roster: BTreeMap::new(),
                held: BTreeMap::new(),
                transport: BTreeMap::new(),
            }
        });
        outgoing.push(Envelope::new(
            Party::Client(id),
            Party::Server,
            Message::AdvertiseKeys {
                ka_pk: *state.ka.public.as_bytes(),
                enc_pk: *state.enc.public.as_bytes(),
            },
        ));
        states.insert(id, state);
    }
    let delivered = net.exchange(outgoing);
    let mut server_roster: BTreeMap<ClientId, [u8; 32]> = BTreeMap::new();
    for env in &delivered {
        if let (Party::Client(id), Message::AdvertiseKeys { ka_pk, .. }) = (env.sender, &env.msg) {
            server_roster.insert(id, *ka_pk);
        }
    }
    let u_adv: BTreeSet<ClientId> = server_roster.keys().copied().collect();
    if u_adv.len() < cfg.threshold {
        return Err(SecAggError::Unrecoverable {
            live: u_adv.len(),
            threshold: cfg.threshold,
        });
    }
    let roster_msg = net.compute(Party::Server, "roster", || Message::Roster {
        entries: delivered
            .iter()
            .filter_map(|env| match (&env.sender, &env.msg) {
                (Party::Client(id), Message::AdvertiseKeys { ka_pk, enc_pk }) => {
                    Some(RosterEntry {
                        client: *id,
                        ka_pk: *ka_pk,
                        enc_pk: *enc_pk,
                    })
                }
                _ => None,
            })
            .collect(),
    });
    let broadcast = u_adv
        .iter()
        .map(|&v| Envelope::new(Party::Server, Party::Client(v), roster_msg.clone()))
        .collect();
    for env in net.exchange(broadcast) {
        if let (Party::Client(v), Message::Roster { entries }) = (env.receiver, env.msg) {
            if let Some(state) = states.get_mut(&v) {
                state.roster = entries
                    .into_iter()
                    .map(|e| (e.client, (e.ka_pk, e.enc_pk)))
                    .collect();
            }
        }
    }
    net.advance_phase();

    // Round 1: threshold-share b and the DH secret to every round-0 peer.
    let indices: Vec<u64> = u_adv.iter().map(|&v| v as u64 + 1).collect();
    let mut outgoing = Vec::new();
    for &u in &u_adv {
        if !net.is_live_now(u) {
            continue;
        }
        let state = states.get_mut(&u).expect("advertiser has state");
        let produced = net.compute(Party::Client(u), "share_keys", || {
            let b_shares = shamir_share_at(&state.b_seed, cfg.threshold, &indices, &mut state.rng)?;
            let sk_shares = shamir_share_at(
                &state.ka.secret.to_bytes(),
                cfg.threshold,
                &indices,
                &mut state.rng,
            )?;
            let mut own = None;
            let mut sealed = Vec::with_capacity(u_adv.len() - 1);
            for (i, &v) in u_adv.iter().enumerate() {
                let pair = (b_shares[i].clone(), sk_shares[i].clone());
                if v == u {
                    own = Some(pair);
                    continue;
                }
                let ct = state
                    .transport_cipher(v)?
                    .encrypt(&share_nonce(u, v), encode_share_pair(&pair.0, &pair.1).as_slice())
                    .map_err(|_| SecAggError::Corruption("share sealing failed".into()))?;
                sealed.push((v, ct));
            }
            Ok::<_, SecAggError>((own, sealed))
        });
        let (own, sealed) = produced?;
        if let Some(pair) = own {
            state.held.insert(u, pair);
        }
        for (v, ciphertext) in sealed {
            outgoing.push(Envelope::new(
                Party::Client(u),
                Party::Server,
                Message::EncryptedShares {
                    recipient: v,
                    ciphertext,
                },
            ));
        }
    }
    let delivered = net.exchange(outgoing);
    let mut pending: BTreeMap<ClientId, Vec<(u32, Vec<u8>)>> = BTreeMap::new();
    let mut u_share: BTreeSet<ClientId> = BTreeSet::new();
    for env in delivered {
        if let (
            Party::Client(owner),
            Message::EncryptedShares {
                recipient,
                ciphertext,
            },
        ) = (env.sender, env.msg)
        {
            u_share.insert(owner);
            pending.entry(recipient).or_default().push((owner, ciphertext));
        }
    }
    if u_share.len() < cfg.threshold {
        return Err(SecAggError::Unrecoverable {
            live: u_share.len(),
            threshold: cfg.threshold,
        });
    }
    let bundles: Vec<Envelope> = net.compute(Party::Server, "route_shares", || {
        u_share
            .iter()
            .map(|&v| {
                let mut shares = pending.remove(&v).unwrap_or_default();
                shares.retain(|(owner, _)| u_share.contains(owner));
                shares.sort_by_key(|(owner, _)| *owner);
                Envelope::new(
                    Party::Server,
                    Party::Client(v),
                    Message::ShareBundle { shares },
                )
            })
            .collect()
    });
    for env in net.exchange(bundles) {
        if let (Party::Client(v), Message::ShareBundle { shares }) = (env.receiver, env.msg) {
            if !net.is_live_now(v) {
                continue;
            }
            if let Some(state) = states.get_mut(&v) {
                let opened = net.compute(Party::Client(v), "open_shares", || {
                    let mut out = Vec::with_capacity(shares.len());
                    for (owner, blob) in &shares {
                        let pt = state
                            .transport_cipher(*owner)?
                            .decrypt(&share_nonce(*owner, v), blob.as_slice())
                            .map_err(|_| {
                                SecAggError::Corruption(format!(
                                    "share from {owner} failed authentication"
                                ))
                            })?;
                        out.push((*owner, decode_share_pair(&pt)?));
                    }
                    Ok::<_, SecAggError>(out)
                })?;
                for (owner, pair) in opened {
                    state.held.insert(owner, pair);
                }
            }
        }
    }
    net.advance_phase();

    // Round 2: masked inputs over the share-holder set.
    let mut outgoing = Vec::new();
    for &u in &u_share {
        if !net.is_live_now(u) {
            continue;
        }
        let state = states.get_mut(&u).expect("share sender has state");
        let x = &inputs[&u];
        let peers: BTreeSet<ClientId> = u_share.iter().copied().filter(|&v| v != u).collect();
        let masked = net.compute(Party::Client(u), "mask_input", || {
            let mut pairwise = BTreeMap::new();
            for &v in &peers {
                let (ka_pk, _) = state
                    .roster
                    .get(&v)
                    .ok_or(SecAggError::MissingPairwiseSeed(v))?;
                let seed = ka_agree(&state.ka.secret, &PublicKey::from(*ka_pk))?;
                pairwise.insert(v, seed);
            }
            client_mask_input(x, &state.b_seed, &pairwise, &peers, u, cfg)
        })?;
        outgoing.push(Envelope::new(
            Party::Client(u),
            Party::Server,
            Message::MaskedInput {
                width,
                values: masked,
            },
        ));
    }
    let mut masked_uploads: BTreeMap<ClientId, Vec<u64>> = BTreeMap::new();
    for env in net.exchange(outgoing) {
        if let (Party::Client(u), Message::MaskedInput { values, .. }) = (env.sender, env.msg) {
            masked_uploads.insert(u, values);
        }
    }
    let u_mask: BTreeSet<ClientId> = masked_uploads.keys().copied().collect();
    if u_mask.len() < cfg.threshold {
        return Err(SecAggError::Unrecoverable {
            live: u_mask.len(),
            threshold: cfg.threshold,
        });
    }
    net.advance_phase();

    // Round 3: the server resolves liveness at the phase boundary, then
    // announces who counts as online (upload kept) and who needs
    // recovery. Survivors answer with b-shares for the online set and
    // DH-secret shares for the dropped set, never both for one client.
    let online: BTreeSet<ClientId> = u_mask
        .iter()
        .copied()
        .filter(|&u| net.is_live_now(u))
        .collect();
    let dropped: BTreeSet<ClientId> = u_share.difference(&online).copied().collect();
    let announce = net.compute(Party::Server, "survivor_sets", || Message::SurvivorSets {
        online: online.iter().copied().collect(),
        dropped: dropped.iter().copied().collect(),
    });
    let announcements = u_mask
        .iter()
        .map(|&u| Envelope::new(Party::Server, Party::Client(u), announce.clone()))
        .collect();
    let mut outgoing = Vec::new();
    for env in net.exchange(announcements) {
        let (Party::Client(u), Message::SurvivorSets { online, dropped }) =
            (env.receiver, env.msg)
        else {
            continue;
        };
        if !net.is_live_now(u) {
            continue;
        }
        let state = states.get_mut(&u).expect("mask sender has state");
        let response = net.compute(Party::Client(u), "unmask_shares", || {
            let pick = |targets: &[u32], which_b: bool| {
                targets
                    .iter()
                    .map(|&t| {
                        let pair = state.held.get(&t).ok_or_else(|| {
                            SecAggError::Corruption(format!("client {u} holds no share of {t}"))
                        })?;
                        let share = if which_b { &pair.0 } else { &pair.1 };
                        Ok((t, share.to_bytes()))
                    })
                    .collect::<Result<Vec<_>, SecAggError>>()
            };
            Ok::<_, SecAggError>(Message::UnmaskingShares {
                online_shares: pick(&online, true)?,
                dropped_shares: pick(&dropped, false)?,
            })
        })?;
        outgoing.push(Envelope::new(Party::Client(u), Party::Server, response));
    }
    let delivered = net.exchange(outgoing);
    let mut b_shares: BTreeMap<ClientId, Vec<ShamirShare>> = BTreeMap::new();
    let mut sk_shares: BTreeMap<ClientId, Vec<ShamirShare>> = BTreeMap::new();
    let mut responders: BTreeSet<ClientId> = BTreeSet::new();
    for env in delivered {
        if let (
            Party::Client(responder),
            Message::UnmaskingShares {
                online_shares,
                dropped_shares,
            },
        ) = (env.sender, env.msg)
        {
            responders.insert(responder);
            for (owner, blob) in online_shares {
                let share = ShamirShare::from_bytes(&blob)
                    .map_err(|_| SecAggError::Corruption("bad b-share encoding".into()))?;
                b_shares.entry(owner).or_default().push(share);
            }
            for (owner, blob) in dropped_shares {
                let share = ShamirShare::from_bytes(&blob)
                    .map_err(|_| SecAggError::Corruption("bad sk-share encoding".into()))?;
                sk_shares.entry(owner).or_default().push(share);
            }
        }
    }
    if responders.len() < cfg.threshold {
        return Err(SecAggError::Unrecoverable {
            live: responders.len(),
            threshold: cfg.threshold,
        });
    }

    // Server recovery: strip self-masks of the online set, cancel the
    // dangling pairwise masks of the dropped set.
    let sum = net.compute(Party::Server, "recover_sum", || {
        let mut sum = vec![0u64; cfg.vec_len];
        for u in &online {
            add_assign(&mut sum, &masked_uploads[u], mask);
        }
        let mut scratch = vec![0u64; cfg.vec_len];
        for &u in &online {
            let shares = b_shares
                .get(&u)
                .ok_or_else(|| SecAggError::Corruption(format!("no b-shares for {u}")))?;
            let b = shamir_reconstruct(shares, cfg.threshold)?;
            let seed: [u8; PRG_SEED_LEN] = b
                .try_into()
                .map_err(|_| SecAggError::Corruption(format!("b of {u} has wrong length")))?;
            prg::prg_expand_into(&seed, cfg.modulus_log2, &mut scratch);
            sub_assign(&mut sum, &scratch, mask);
        }
        for &w in &dropped {
            let shares = sk_shares
                .get(&w)
                .ok_or_else(|| SecAggError::Corruption(format!("no sk-shares for {w}")))?;
            let sk_bytes: [u8; 32] = shamir_reconstruct(shares, cfg.threshold)?
                .try_into()
                .map_err(|_| SecAggError::Corruption(format!("sk of {w} has wrong length")))?;
            let sk = StaticSecret::from(sk_bytes);
            let advertised = server_roster
                .get(&w)
                .ok_or_else(|| SecAggError::Corruption(format!("no roster entry for {w}")))?;
            if PublicKey::from(&sk).as_bytes() != advertised {
                return Err(SecAggError::Corruption(format!(
                    "reconstructed secret of {w} mismatches advertised key"
                )));
            }
            for &a in &online {
                let pk = PublicKey::from(*server_roster.get(&a).expect("online peer in roster"));
                let seed = ka_agree(&sk, &pk)?;
                prg::prg_expand_into(&seed, cfg.modulus_log2, &mut scratch);
                // Client a's mask holds +PRG(s) if w < a, -PRG(s) if w > a.
                if w < a {
                    sub_assign(&mut sum, &scratch, mask);
                } else {
                    add_assign(&mut sum, &scratch, mask);
                }
            }
        }
        Ok::<_, SecAggError>(sum)
    })?;

    Ok(SecAggOutcome {
        sum,
        survivors: online,
        dropped,
    })
}

/// Runs a self-contained aggregation on a fresh bus and returns the
/// transcript alongside the result. The transcript is produced even when
/// the round fails.
pub fn run_secagg_standalone(
    inputs: &BTreeMap<ClientId, Vec<u64>>,
    cfg: &SecAggConfig,
    schedule: &DropoutSchedule,
    run_seed: [u8; 32],
) -> (Result<SecAggOutcome, SecAggError>, RoundTranscript) {
    let mut net = SimNet::new(schedule.clone());
    let result = run_secagg(inputs, cfg, &mut net, run_seed);
    let participants: BTreeSet<ClientId> = inputs.keys().copied().collect();
    let meta = match &result {
        Ok(outcome) => TranscriptMeta::SecAgg {
            participants,
            online: outcome.survivors.clone(),
            dropped: outcome.dropped.clone(),
        },
        Err(_) => TranscriptMeta::SecAgg {
            participants,
            online: BTreeSet::new(),
            dropped: BTreeSet::new(),
        },
    };
    net.set_meta(meta);
    (result, net.finish())
}
