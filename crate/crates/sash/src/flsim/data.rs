//! Synthetic two-class data, sharded across clients.
//!
//! Samples come from two spherical Gaussians at +-CLASS_SEPARATION/2 along a
//! random unit direction, so the Bayes-optimal linear classifier sits around
//! 91% accuracy and a toy model has real headroom to climb. Shards are
//! generated disjointly and their union is the training set; the test set is
//! drawn separately and never overlaps a shard.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

/// Distance between the two class means, in units of the noise sigma.
pub const CLASS_SEPARATION: f64 = 2.7;

/// One labeled example. `y` is 0 or 1.
#[derive(Debug, Clone)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: u8,
}

/// Per-client shards plus a shared held-out test set.
#[derive(Debug, Clone)]
pub struct FederatedDataset {
    pub shards: Vec<Vec<Sample>>,
    pub test: Vec<Sample>,
}

impl FederatedDataset {
    pub fn feature_len(&self) -> usize {
        self.test.first().map_or(0, |s| s.x.len())
    }

    pub fn train_len(&self) -> usize {
        self.shards.iter().map(Vec::len).sum()
    }
}

fn data_rng(seed: u64) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"flsim-data");
    h.update(seed.to_le_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

fn unit_direction(features: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let mut u: Vec<f64> = (0..features).map(|_| rng.sample(StandardNormal)).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for v in &mut u {
        *v /= norm;
    }
    u
}

fn draw(direction: &[f64], y: u8, rng: &mut ChaCha20Rng) -> Sample {
    let sign = if y == 1 { 1.0 } else { -1.0 };
    let shift = sign * CLASS_SEPARATION / 2.0;
    let x = direction
        .iter()
        .map(|&u| shift * u + rng.sample::<f64, _>(StandardNormal))
        .collect();
    Sample { x, y }
}

/// Builds `clients` shards of `per_client` samples each plus `test_len` test
/// samples. `label_skew` in [0, 1] tilts per-shard class balance: 0 keeps
/// every shard at half and half, 1 spreads class-1 fractions linearly from
/// 0 to 1 across the client index. Same seed, same dataset.
pub fn synth_dataset(
    features: usize,
    clients: usize,
    per_client: usize,
    test_len: usize,
    label_skew: f64,
    seed: u64,
) -> FederatedDataset {
    assert!(features > 0 && clients > 0, "dataset needs features and clients");
    assert!((0.0..=1.0).contains(&label_skew), "label_skew must lie in [0, 1]");
    let mut rng = data_rng(seed);
    let direction = unit_direction(features, &mut rng);

    let mut shards = Vec::with_capacity(clients);
    for c in 0..clients {
        let tilt = if clients > 1 {
            label_skew * (c as f64 / (clients - 1) as f64 - 0.5)
        } else {
            0.0
        };
        let ones = ((per_client as f64) * (0.5 + tilt)).round() as usize;
        let ones = ones.min(per_client);
        let mut shard = Vec::with_capacity(per_client);
        for i in 0..per_client {
            let y = u8::from(i < ones);
            shard.push(draw(&direction, y, &mut rng));
        }
        // Interleave classes so a minibatch prefix is not single-class.
        for i in (1..shard.len()).rev() {
            let j = rng.gen_range(0..=i);
            shard.swap(i, j);
        }
        shards.push(shard);
    }

    let test = (0..test_len)
        .map(|_| {
            let y = u8::from(rng.gen_bool(0.5));
            draw(&direction, y, &mut rng)
        })
        .collect();

    FederatedDataset { shards, test }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shards_partition_and_test_is_separate() {
        let ds = synth_dataset(24, 5, 30, 100, 0.0, 7);
        assert_eq!(ds.shards.len(), 5);
        assert!(ds.shards.iter().all(|s| s.len() == 30));
        assert_eq!(ds.train_len(), 150);
        assert_eq!(ds.test.len(), 100);
        assert_eq!(ds.feature_len(), 24);
        for shard in &ds.shards {
            for s in shard {
                assert_eq!(s.x.len(), 24);
                assert!(s.y <= 1);
                assert!(s.x.iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn iid_shards_are_balanced() {
        let ds = synth_dataset(8, 6, 40, 10, 0.0, 3);
        for shard in &ds.shards {
            let ones: usize = shard.iter().map(|s| s.y as usize).sum();
            assert_eq!(ones, 20, "skew 0 pins every shard at exactly half ones");
        }
    }

    #[test]
    fn label_skew_tilts_shard_composition() {
        let ds = synth_dataset(8, 5, 40, 10, 1.0, 3);
        let ones: Vec<usize> = ds
            .shards
            .iter()
            .map(|shard| shard.iter().map(|s| s.y as usize).sum())
            .collect();
        assert_eq!(ones, vec![0, 10, 20, 30, 40]);
    }

    #[test]
    fn classes_separate_along_the_planted_direction() {
        let ds = synth_dataset(32, 4, 50, 400, 0.0, 11);
        // Estimate the direction from class means of the test split; the
        // projected gap should land near CLASS_SEPARATION.
        let dim = ds.feature_len();
        let mut mean1 = vec![0.0; dim];
        let mut mean0 = vec![0.0; dim];
        let (mut n1, mut n0) = (0.0, 0.0);
        for s in &ds.test {
            let (m, n) = if s.y == 1 { (&mut mean1, &mut n1) } else { (&mut mean0, &mut n0) };
            for (acc, v) in m.iter_mut().zip(&s.x) {
                *acc += v;
            }
            *n += 1.0;
        }
        let gap: Vec<f64> = mean1
            .iter()
            .zip(&mean0)
            .map(|(a, b)| a / n1 - b / n0)
            .collect();
        let norm = gap.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(
            (norm - CLASS_SEPARATION).abs() < 0.8,
            "projected class gap {norm:.2} strays too far from the plant"
        );
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = synth_dataset(16, 3, 20, 50, 0.3, 99);
        let b = synth_dataset(16, 3, 20, 50, 0.3, 99);
        for (sa, sb) in a.test.iter().zip(&b.test) {
            assert_eq!(sa.y, sb.y);
            assert_eq!(sa.x, sb.x);
        }
        for (ra, rb) in a.shards.iter().zip(&b.shards) {
            for (sa, sb) in ra.iter().zip(rb) {
                assert_eq!(sa.x, sb.x);
            }
        }
    }
}
