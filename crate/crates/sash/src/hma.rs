//! Homomorphic-mask aggregation: the outer protocol.
//!
//! Each epoch a client quantizes its model update, adds one
//! seed-homomorphic mask G(k_u) mod p, and uploads the result in a
//! single message. The per-epoch keys k_u are then run through the
//! masking-key agreement (the double-masked engine in [`crate::secagg`]
//! with L = mu and R = q), which hands the server the key sum k0 of
//! exactly the surviving clients. One evaluation of G(k0) demasks the
//! whole aggregate at once; a small centered correction absorbs the
//! rounding slack the almost-homomorphism leaves behind.
//!
//! Global phase layout, one schedule across both layers:
//!
//!   phase 0      masked upload (clients live at epoch start)
//!   phases 1..4  key agreement rounds 0..3 over the uploaders
//!
//! Clients that upload but fall out of the key agreement are excluded:
//! their keys are not in k0, so the server discards their uploads and
//! averages over the agreement's survivor set.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::quantizer::{center_correct, dequantize_sum, quantize, QuantConfig, QuantError};
use crate::secagg::{run_secagg, SecAggConfig, SecAggError};
use crate::shprg::{derive_matrix, eval, MaskingKey, PublicMatrix, ShprgError, ShprgParams};
use crate::simnet::{
    ClientId, DropoutSchedule, Envelope, Party, RoundTranscript, SimNet, TranscriptMeta,
};
use crate::wire::Message;

/// Phases a full epoch occupies on the bus.
pub const EPOCH_PHASES: u32 = 5;

#[derive(Debug, Error)]
pub enum HmaError {
    #[error("bad config: {0}")]
    BadConfig(&'static str),
    #[error("update has {got} coordinates, expected {expected}")]
    BadUpdate { expected: usize, got: usize },
    #[error("no surviving uploads to aggregate")]
    NoSurvivors,
    #[error(transparent)]
    Shprg(#[from] ShprgError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    SecAgg(#[from] SecAggError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmaConfig {
    pub shprg: ShprgParams,
    pub quant: QuantConfig,
    /// Cohort size U0.
    pub n: usize,
    /// Recovery threshold handed to the key agreement. Fixed per
    /// deployment; it never shrinks when clients drop.
    pub threshold: usize,
}

impl HmaConfig {
    /// Desk-scale defaults: mu = 512, q = 2^64, p = 2^32, 16-bit
    /// quantization on [-1, 1), threshold floor(2n/3) + 1.
    pub fn desk_default(n: usize, output_len: usize, matrix_seed: [u8; 32]) -> HmaConfig {
        HmaConfig {
            shprg: ShprgParams::desk_default(output_len, matrix_seed),
            quant: QuantConfig::desk_default(n),
            n,
            threshold: SecAggConfig::default_threshold(n),
        }
    }

    pub fn validate(&self) -> Result<(), HmaError> {
        self.shprg.validate()?;
        self.quant.validate()?;
        // All n uploads may survive, so the sum bound must hold at n.
        self.quant.validate_modulus(self.shprg.small_modulus_log2)?;
        if self.n < 2 {
            return Err(HmaError::BadConfig("need at least two clients"));
        }
        if self.quant.n_max < self.n {
            return Err(HmaError::BadConfig("quantizer n_max below cohort size"));
        }
        if self.threshold <= 1 || self.threshold > self.n {
            return Err(HmaError::BadConfig("need 1 < threshold <= n"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome {
    /// Coordinate-wise average of the surviving clipped updates.
    pub average: Vec<f64>,
    /// Center-corrected quantized sum mod p the average derives from.
    pub integer_sum: Vec<u64>,
    pub u0: BTreeSet<ClientId>,
    pub u1: BTreeSet<ClientId>,
    pub u2: BTreeSet<ClientId>,
    pub transcript: RoundTranscript,
}

/// Per-epoch masking key: fresh randomness per (run, client, epoch).
fn epoch_key(run_seed: &[u8; 32], id: ClientId, epoch: u64, params: &ShprgParams) -> MaskingKey {
    let mut hasher = Sha256::new();
    hasher.update(b"hma-key");
    hasher.update(run_seed);
    hasher.update(id.to_le_bytes());
    hasher.update(epoch.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(hasher.finalize().into());
    MaskingKey::random(&mut rng, params)
}

fn mka_run_seed(run_seed: &[u8; 32], epoch: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"mka-run");
    hasher.update(run_seed);
    hasher.update(epoch.to_le_bytes());
    hasher.finalize().into()
}

pub struct HmaEngine {
    cfg: HmaConfig,
    matrix: PublicMatrix,
}

impl HmaEngine {
    /// Validates the config and derives the public matrix once. Epochs
    /// reuse it; matrix expansion never appears in per-epoch timings.
    pub fn new(cfg: HmaConfig) -> Result<HmaEngine, HmaError> {
        cfg.validate()?;
        let matrix = derive_matrix(&cfg.shprg)?;
        Ok(HmaEngine { cfg, matrix })
    }

    pub fn config(&self) -> &HmaConfig {
        &self.cfg
    }

    /// y_u = Q(m_u) + G(k_u) mod p.
    pub fn client_mask(&self, update: &[f64], key: &MaskingKey) -> Result<Vec<u64>, HmaError> {
        let m = self.cfg.shprg.output_len;
        if update.len() != m {
            return Err(HmaError::BadUpdate {
                expected: m,
                got: update.len(),
            });
        }
        let quantized = quantize(update, &self.cfg.quant)?;
        let g = eval(&self.matrix, key)?;
        let p_mask = self.cfg.shprg.p_mask();
        Ok(quantized
            .0
            .iter()
            .zip(g.0.iter())
            .map(|(&x, &gv)| (x as u64).wrapping_add(gv) & p_mask)
            .collect())
    }

    /// Coordinate-wise sum of the surviving uploads mod p.
    pub fn server_aggregate(
        &self,
        uploads: &BTreeMap<ClientId, Vec<u64>>,
    ) -> Result<Vec<u64>, HmaError> {
        if uploads.is_empty() {
            return Err(HmaError::NoSurvivors);
        }
        let m = self.cfg.shprg.output_len;
        let p_mask = self.cfg.shprg.p_mask();
        let mut sum = vec![0u64; m];
        for (&id, y) in uploads {
            if y.len() != m {
                return Err(HmaError::SecAgg(SecAggError::BadInput(id)));
            }
            // p divides 2^64, so wrapping sums stay exact mod p and one
            // reduction at the end suffices. The range check rides along
            // as an or-fold; a violation discards the polluted sum.
            let mut seen = 0u64;
            for (acc, &v) in sum.iter_mut().zip(y.iter()) {
                seen |= v;
                *acc = acc.wrapping_add(v);
            }
            if seen & !p_mask != 0 {
                return Err(HmaError::SecAgg(SecAggError::BadInput(id)));
            }
        }
        for acc in &mut sum {
            *acc &= p_mask;
        }
        Ok(sum)
    }

    /// Subtracts G(k0), corrects the homomorphism slack, and returns the
    /// per-coordinate average over `n2` survivors together with the
    /// corrected integer sum.
    pub fn server_demask(
        &self,
        aggregate: &[u64],
        key_sum: &MaskingKey,
        n2: usize,
    ) -> Result<(Vec<f64>, Vec<u64>), HmaError> {
        if n2 == 0 {
            return Err(HmaError::NoSurvivors);
        }
        let g0 = eval(&self.matrix, key_sum)?;
        let p_mask = self.cfg.shprg.p_mask();
        let diff: Vec<u64> = aggregate
            .iter()
            .zip(g0.0.iter())
            .map(|(&a, &g)| a.wrapping_sub(g) & p_mask)
            .collect();
        let corrected = center_correct(
            &diff,
            n2,
            &self.cfg.quant,
            self.cfg.shprg.small_modulus_log2,
        )?;
        let sums = dequantize_sum(&corrected, n2, &self.cfg.quant);
        let average = sums.iter().map(|s| s / n2 as f64).collect();
        Ok((average, corrected))
    }

    /// One full epoch on a fresh bus. Every client in `updates` computes
    /// its masked upload; the schedule then decides whose messages
    /// arrive. Keys for the uploaders go through the key agreement and
    /// the server averages over its survivor set.
    pub fn run_epoch(
        &self,
        updates: &BTreeMap<ClientId, Vec<f64>>,
        schedule: &DropoutSchedule,
        run_seed: [u8; 32],
        epoch: u64,
    ) -> Result<EpochOutcome, HmaError> {
        if updates.len() != self.cfg.n {
            return Err(HmaError::BadConfig("update count differs from cfg.n"));
        }
        let m = self.cfg.shprg.output_len;
        for update in updates.values() {
            if update.len() != m {
                return Err(HmaError::BadUpdate {
                    expected: m,
                    got: update.len(),
                });
            }
        }
        let width = self.cfg.shprg.small_modulus_log2.div_ceil(8) as u8;
        let mut net = SimNet::new(schedule.clone());
        let u0: BTreeSet<ClientId> = updates.keys().copied().collect();

        // Phase 0: clients already offline at epoch start never run; the
        // bus additionally drops uploads from clients that die mid-phase.
        let mut keys: BTreeMap<ClientId, MaskingKey> = BTreeMap::new();
        let mut outgoing = Vec::new();
        for (&id, update) in updates {
            if !net.is_live_now(id) {
                continue;
            }
            let (key, masked) = net.compute(Party::Client(id), "mask_update", || {
                let key = epoch_key(&run_seed, id, epoch, &self.cfg.shprg);
                let masked = self.client_mask(update, &key)?;
                Ok::<_, HmaError>((key, masked))
            })?;
            outgoing.push(Envelope::new(
                Party::Client(id),
                Party::Server,
                Message::MaskedInput {
                    width,
                    values: masked,
                },
            ));
            keys.insert(id, key);
        }
        let mut uploads: BTreeMap<ClientId, Vec<u64>> = BTreeMap::new();
        for env in net.exchange(outgoing) {
            if let (Party::Client(id), Message::MaskedInput { values, .. }) = (env.sender, env.msg)
            {
                uploads.insert(id, values);
            }
        }
        let u1: BTreeSet<ClientId> = uploads.keys().copied().collect();
        net.advance_phase();

        // Phases 1..4: agree on the key sum of the survivors.
        if u1.len() < self.cfg.threshold {
            return Err(SecAggError::Unrecoverable {
                live: u1.len(),
                threshold: self.cfg.threshold,
            }
            .into());
        }
        let mka_cfg = SecAggConfig {
            n: u1.len(),
            threshold: self.cfg.threshold,
            vec_len: self.cfg.shprg.mu,
            modulus_log2: self.cfg.shprg.big_modulus_log2,
        };
        let mka_inputs: BTreeMap<ClientId, Vec<u64>> = u1
            .iter()
            .map(|&id| (id, keys[&id].0.clone()))
            .collect();
        let mka_out = run_secagg(&mka_inputs, &mka_cfg, &mut net, mka_run_seed(&run_seed, epoch))?;
        let u2 = mka_out.survivors;
        let k0 = MaskingKey(mka_out.sum);

        // The key sum covers exactly u2, so only those uploads count.
        let surviving: BTreeMap<ClientId, Vec<u64>> = u2
            .iter()
            .map(|&id| (id, uploads.remove(&id).expect("survivor uploaded")))
            .collect();
        let aggregate = net.compute(Party::Server, "aggregate", || {
            self.server_aggregate(&surviving)
        })?;
        let (average, integer_sum) = net.compute(Party::Server, "demask", || {
            self.server_demask(&aggregate, &k0, u2.len())
        })?;
        let broadcast = u2
            .iter()
            .map(|&id| {
                Envelope::new(
                    Party::Server,
                    Party::Client(id),
                    Message::ResultBroadcast {
                        values: average.clone(),
                    },
                )
            })
            .collect();
        net.exchange(broadcast);
        net.set_meta(TranscriptMeta::Sash {
            u0: u0.clone(),
            u1: u1.clone(),
            u2: u2.clone(),
        });
        Ok(EpochOutcome {
            average,
            integer_sum,
            u0,
            u1,
            u2,
            transcript: net.finish(),
        })
    }
}
