//! Deterministic in-memory network for round-structured protocols.
//!
//! Time advances in global phases. Parties hand the bus a batch of
//! envelopes; the bus drops everything sent by a client whose dropout
//! phase has arrived, sorts the remainder by sender, serializes each
//! message once to charge exact byte counts, and hands back the decoded
//! survivors. Nothing here is concurrent: a run is a pure function of
//! (schedule, the messages the protocol chooses to send), which is what
//! makes transcripts bit-identical across repeat runs.
//!
//! The global phase sequence for masked aggregation is: phase 0 the mask
//! upload, phases 1 through 4 the four key-agreement rounds. A standalone
//! aggregation run uses phases 0 through 3.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::wire::Message;

pub type ClientId = u32;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("duplicate dropout entry for client {0}")]
    DuplicateDrop(ClientId),
    #[error("malformed schedule line {0:?}")]
    BadSchedule(String),
}

/// Variant order gives clients (ascending id) before the server, which is
/// the delivery order inside a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    Client(ClientId),
    Server,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Client(id) => write!(f, "c{id}"),
            Party::Server => write!(f, "server"),
        }
    }
}

/// Which clients drop, and at which global phase. A client dropped at
/// phase k delivers nothing at phase k or later; at most one entry per
/// client.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DropoutSchedule {
    drops: BTreeMap<ClientId, u32>,
}

impl DropoutSchedule {
    pub fn none() -> Self {
        DropoutSchedule::default()
    }

    pub fn new(pairs: impl IntoIterator<Item = (ClientId, u32)>) -> Result<Self, SimError> {
        let mut drops = BTreeMap::new();
        for (client, phase) in pairs {
            if drops.insert(client, phase).is_some() {
                return Err(SimError::DuplicateDrop(client));
            }
        }
        Ok(DropoutSchedule { drops })
    }

    pub fn drop_phase(&self, client: ClientId) -> Option<u32> {
        self.drops.get(&client).copied()
    }

    pub fn is_live(&self, client: ClientId, phase: u32) -> bool {
        match self.drops.get(&client) {
            Some(&at) => phase < at,
            None => true,
        }
    }

    pub fn num_drops(&self) -> usize {
        self.drops.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClientId, u32)> + '_ {
        self.drops.iter().map(|(&c, &p)| (c, p))
    }

    /// One "client,phase" pair per line, sorted by client id.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (client, phase) in &self.drops {
            out.push_str(&format!("{client},{phase}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SimError> {
        let mut pairs = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (c, p) = line
                .split_once(',')
                .ok_or_else(|| SimError::BadSchedule(line.to_string()))?;
            let client = c
                .trim()
                .parse()
                .map_err(|_| SimError::BadSchedule(line.to_string()))?;
            let phase = p
                .trim()
                .parse()
                .map_err(|_| SimError::BadSchedule(line.to_string()))?;
            pairs.push((client, phase));
        }
        DropoutSchedule::new(pairs)
    }
}

#[derive(Debug, Clone)]
pub struct Envelope {
    pub sender: Party,
    pub receiver: Party,
    pub msg: Message,
}

impl Envelope {
    pub fn new(sender: Party, receiver: Party, msg: Message) -> Self {
        Envelope {
            sender,
            receiver,
            msg,
        }
    }
}

/// Applies the dropout filter for one phase and fixes delivery order.
/// Server messages always pass. Stable sort keeps each sender's own
/// emission order for multi-message uploads.
pub fn deliver_phase(
    messages: Vec<Envelope>,
    schedule: &DropoutSchedule,
    phase: u32,
) -> Vec<Envelope> {
    let mut delivered: Vec<Envelope> = messages
        .into_iter()
        .filter(|env| match env.sender {
            Party::Client(id) => schedule.is_live(id, phase),
            Party::Server => true,
        })
        .collect();
    delivered.sort_by_key(|env| env.sender);
    delivered
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsgRecord {
    pub phase: u32,
    pub sender: Party,
    pub receiver: Party,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputeRecord {
    pub phase: u32,
    pub party: Party,
    pub label: &'static str,
    pub wall_nanos: u64,
}

/// Survivor-set summary attached to a finished transcript.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TranscriptMeta {
    Unset,
    Sash {
        u0: BTreeSet<ClientId>,
        u1: BTreeSet<ClientId>,
        u2: BTreeSet<ClientId>,
    },
    SecAgg {
        participants: BTreeSet<ClientId>,
        online: BTreeSet<ClientId>,
        dropped: BTreeSet<ClientId>,
    },
    Plain {
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTranscript {
    pub meta: TranscriptMeta,
    pub msgs: Vec<MsgRecord>,
    pub compute: Vec<ComputeRecord>,
}

impl RoundTranscript {
    fn empty() -> Self {
        RoundTranscript {
            meta: TranscriptMeta::Unset,
            msgs: Vec::new(),
            compute: Vec::new(),
        }
    }

    pub fn sent_bytes(&self, party: Party) -> u64 {
        self.msgs
            .iter()
            .filter(|m| m.sender == party)
            .map(|m| m.bytes as u64)
            .sum()
    }

    pub fn received_bytes(&self, party: Party) -> u64 {
        self.msgs
            .iter()
            .filter(|m| m.receiver == party)
            .map(|m| m.bytes as u64)
            .sum()
    }

    pub fn compute_nanos(&self, party: Party) -> u64 {
        self.compute
            .iter()
            .filter(|c| c.party == party)
            .map(|c| c.wall_nanos)
            .sum()
    }

    pub fn total_bytes(&self) -> u64 {
        self.msgs.iter().map(|m| m.bytes as u64).sum()
    }

    /// Every party that sent, received, or computed anything.
    pub fn parties(&self) -> BTreeSet<Party> {
        let mut set = BTreeSet::new();
        for m in &self.msgs {
            set.insert(m.sender);
            set.insert(m.receiver);
        }
        for c in &self.compute {
            set.insert(c.party);
        }
        set
    }

    /// Line-delimited text export. With `include_wall` false every
    /// wall-time field renders as zero, which is the canonical form for
    /// determinism comparison.
    pub fn to_text(&self, include_wall: bool) -> String {
        let mut out = String::new();
        match &self.meta {
            TranscriptMeta::Unset => out.push_str("meta:mode=unset\n"),
            TranscriptMeta::Sash { u0, u1, u2 } => {
                out.push_str("meta:mode=sash\n");
                out.push_str(&format!("meta:u0={}\n", join_ids(u0)));
                out.push_str(&format!("meta:u1={}\n", join_ids(u1)));
                out.push_str(&format!("meta:u2={}\n", join_ids(u2)));
            }
            TranscriptMeta::SecAgg {
                participants,
                online,
                dropped,
            } => {
                out.push_str("meta:mode=secagg\n");
                out.push_str(&format!("meta:participants={}\n", join_ids(participants)));
                out.push_str(&format!("meta:online={}\n", join_ids(online)));
                out.push_str(&format!("meta:dropped={}\n", join_ids(dropped)));
            }
            TranscriptMeta::Plain { n } => {
                out.push_str("meta:mode=plain\n");
                out.push_str(&format!("meta:n={n}\n"));
            }
        }
        for m in &self.msgs {
            out.push_str(&format!(
                "msg:phase={} from={} to={} bytes={}\n",
                m.phase, m.sender, m.receiver, m.bytes
            ));
        }
        for c in &self.compute {
            let wall = if include_wall { c.wall_nanos } else { 0 };
            out.push_str(&format!(
                "cmp:phase={} party={} label={} wall_ns={}\n",
                c.phase, c.party, c.label, wall
            ));
        }
        for party in self.parties() {
            let compute = if include_wall {
                self.compute_nanos(party)
            } else {
                0
            };
            out.push_str(&format!(
                "total:party={} sent={} received={} compute_ns={}\n",
                party,
                self.sent_bytes(party),
                self.received_bytes(party),
                compute
            ));
        }
        out
    }
}

fn join_ids(ids: &BTreeSet<ClientId>) -> String {
    let strs: Vec<String> = ids.iter().map(|id| id.to_string()).collect();
    strs.join(",")
}

/// The bus. Owns the schedule, the phase counter, and the growing
/// transcript.
pub struct SimNet {
    schedule: DropoutSchedule,
    phase: u32,
    transcript: RoundTranscript,
}

impl SimNet {
    pub fn new(schedule: DropoutSchedule) -> Self {
        SimNet {
            schedule,
            phase: 0,
            transcript: RoundTranscript::empty(),
        }
    }

    pub fn phase(&self) -> u32 {
        self.phase
    }

    pub fn advance_phase(&mut self) {
        self.phase += 1;
    }

    pub fn schedule(&self) -> &DropoutSchedule {
        &self.schedule
    }

    pub fn is_live_now(&self, client: ClientId) -> bool {
        self.schedule.is_live(client, self.phase)
    }

    /// Commits one phase worth of traffic: filters dropped senders,
    /// serializes each surviving message to charge its exact size, and
    /// returns the decoded result in delivery order.
    pub fn exchange(&mut self, outgoing: Vec<Envelope>) -> Vec<Envelope> {
        let delivered = deliver_phase(outgoing, &self.schedule, self.phase);
        let mut decoded = Vec::with_capacity(delivered.len());
        for env in delivered {
            let bytes = env.msg.encode();
            self.transcript.msgs.push(MsgRecord {
                phase: self.phase,
                sender: env.sender,
                receiver: env.receiver,
                bytes: bytes.len(),
            });
            let msg = Message::decode(&bytes).expect("encoder produced undecodable message");
            decoded.push(Envelope::new(env.sender, env.receiver, msg));
        }
        decoded
    }

    /// Runs a party's local computation and charges its wall time to the
    /// current phase.
    pub fn compute<T>(&mut self, party: Party, label: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let wall_nanos = start.elapsed().as_nanos().min(u128::from(u64::MAX)) as u64;
        self.transcript.compute.push(ComputeRecord {
            phase: self.phase,
            party,
            label,
            wall_nanos,
        });
        out
    }

    pub fn set_meta(&mut self, meta: TranscriptMeta) {
        self.transcript.meta = meta;
    }

    pub fn transcript(&self) -> &RoundTranscript {
        &self.transcript
    }

    pub fn finish(self) -> RoundTranscript {
        self.transcript
    }
}

/// Number of deterministic samples returned per call once n is past the
/// exhaustive limit.
pub const WORST_CASE_SAMPLES: usize = 256;

/// All schedules with at most `max_drops` dropped clients, each assigned
/// one of `phases` drop phases. Exhaustive for n <= 8 (count is
/// sum_k C(n,k) * phases^k, which stays in the low thousands there); for
/// larger n, a fixed-size deterministic pseudorandom sample of the same
/// space, always including the empty schedule.
pub fn enumerate_worst_case(n: u32, max_drops: usize, phases: u32) -> Vec<DropoutSchedule> {
    if n <= 8 {
        let mut out = Vec::new();
        for mask in 0u32..(1 << n) {
            let k = mask.count_ones() as usize;
            if k > max_drops {
                continue;
            }
            let members: Vec<ClientId> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            // Mixed-radix counter over phase assignments.
            let total: u64 = (phases as u64).pow(k as u32);
            for combo in 0..total {
                let mut rem = combo;
                let mut pairs = Vec::with_capacity(k);
                for &c in &members {
                    pairs.push((c, (rem % phases as u64) as u32));
                    rem /= phases as u64;
                }
                out.push(DropoutSchedule::new(pairs).expect("members are distinct"));
            }
        }
        return out;
    }
    let mut hasher = Sha256::new();
    hasher.update(b"worst-case-sample");
    hasher.update(n.to_le_bytes());
    hasher.update((max_drops as u64).to_le_bytes());
    hasher.update(phases.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(hasher.finalize().into());
    let mut out = Vec::with_capacity(WORST_CASE_SAMPLES);
    out.push(DropoutSchedule::none());
    while out.len() < WORST_CASE_SAMPLES {
        let k = if max_drops == 0 {
            0
        } else {
            rng.gen_range(1..=max_drops)
        };
        let mut chosen = BTreeSet::new();
        while chosen.len() < k {
            chosen.insert(rng.gen_range(0..n));
        }
        let pairs: Vec<(ClientId, u32)> = chosen
            .into_iter()
            .map(|c| (c, rng.gen_range(0..phases)))
            .collect();
        out.push(DropoutSchedule::new(pairs).expect("chosen set is distinct"));
    }
    out
}
