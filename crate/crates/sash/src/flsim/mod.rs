//! Federated training loop over the masked aggregation engine.
//!
//! `run_experiment` trains the same toy model twice from identical
//! initialization and rng seeds: once with plaintext FedAvg averaging and
//! once with masked aggregation in the loop. The paired accuracy/loss curves
//! land in a CSV with columns `round,mode,accuracy,loss`; the only daylight
//! between the trajectories is quantization, which stays bounded per round
//! by the quantizer step. Experiment configs are flat `key = value` text.

pub mod data;
pub mod model;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::hma::{HmaConfig, HmaEngine, HmaError};
use crate::quantizer::QuantConfig;
use crate::simnet::{ClientId, DropoutSchedule};
use data::{synth_dataset, FederatedDataset};
use model::{local_train, ModelKind, ToyModel};

#[derive(Debug, Error)]
pub enum FlError {
    #[error("bad experiment config: {0}")]
    BadConfig(String),
    #[error("local training diverged to a non-finite loss")]
    Diverged,
    #[error(transparent)]
    Hma(#[from] HmaError),
}

/// Aggregation rule for one FedAvg round. Both arms clip updates into the
/// quantizer's representable range first, so mode parity compares like for
/// like: plain averaging sees exactly the values masking would have seen.
pub enum AggMode<'a> {
    Plain { quant: &'a QuantConfig },
    Sash {
        engine: &'a HmaEngine,
        schedule: &'a DropoutSchedule,
        run_seed: [u8; 32],
        epoch: u64,
    },
}

/// Averages one round of client updates under the chosen rule and returns
/// the global update. Plain mode averages every update it is handed; masked
/// mode averages over the surviving set its protocol run settles on, so with
/// an empty dropout schedule the two denominators agree.
pub fn fedavg_round(
    updates: &BTreeMap<ClientId, Vec<f64>>,
    mode: AggMode<'_>,
) -> Result<Vec<f64>, FlError> {
    let Some(first) = updates.values().next() else {
        return Err(FlError::BadConfig("no updates to aggregate".into()));
    };
    let dim = first.len();
    if updates.values().any(|u| u.len() != dim) {
        return Err(FlError::BadConfig("ragged update lengths".into()));
    }
    match mode {
        AggMode::Plain { quant } => {
            let hi = quant.m_max.next_down();
            let inv = 1.0 / updates.len() as f64;
            let mut mean = vec![0.0; dim];
            for update in updates.values() {
                for (acc, &v) in mean.iter_mut().zip(update) {
                    *acc += v.clamp(quant.m_min, hi) * inv;
                }
            }
            Ok(mean)
        }
        AggMode::Sash { engine, schedule, run_seed, epoch } => {
            let outcome = engine.run_epoch(updates, schedule, run_seed, epoch)?;
            Ok(outcome.average)
        }
    }
}

/// Experiment shape. `batch == 0` trains full-shard; `rounds == 0` still
/// reports the initial model so paired curves always have a round-0 row.
#[derive(Debug, Clone, PartialEq)]
pub struct FlConfig {
    pub clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub model: ModelKind,
    pub samples_per_client: usize,
    pub test_samples: usize,
    pub label_skew: f64,
}

impl Default for FlConfig {
    fn default() -> Self {
        FlConfig {
            clients: 20,
            rounds: 30,
            local_epochs: 1,
            batch: 0,
            lr: 0.1,
            seed: 42,
            model: ModelKind::Logistic { features: 1500 },
            samples_per_client: 50,
            test_samples: 2000,
            label_skew: 0.0,
        }
    }
}

impl FlConfig {
    pub fn validate(&self) -> Result<(), FlError> {
        if self.clients < 3 {
            return Err(FlError::BadConfig("need at least 3 clients".into()));
        }
        if self.samples_per_client == 0 || self.test_samples == 0 {
            return Err(FlError::BadConfig("need nonempty shards and test set".into()));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(FlError::BadConfig("lr must be positive and finite".into()));
        }
        if !(0.0..=1.0).contains(&self.label_skew) {
            return Err(FlError::BadConfig("label_skew must lie in [0, 1]".into()));
        }
        if let ModelKind::Mlp { hidden, .. } = self.model {
            if hidden == 0 {
                return Err(FlError::BadConfig("mlp needs at least one hidden unit".into()));
            }
        }
        if self.model.features() == 0 {
            return Err(FlError::BadConfig("model needs at least one feature".into()));
        }
        Ok(())
    }

    /// Parses a flat `key = value` config. Blank lines and `#` comments are
    /// skipped; unknown keys are errors so typos cannot silently fall back
    /// to defaults. Absent keys keep their default.
    pub fn parse(text: &str) -> Result<FlConfig, FlError> {
        let mut cfg = FlConfig::default();
        let (mut features, mut hidden) = (cfg.model.features(), 16usize);
        let mut family = String::from("logistic");
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(FlError::BadConfig(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| {
                FlError::BadConfig(format!("line {}: bad {what} `{value}`", lineno + 1))
            };
            match key {
                "clients" => cfg.clients = value.parse().map_err(|_| bad("clients"))?,
                "rounds" => cfg.rounds = value.parse().map_err(|_| bad("rounds"))?,
                "local_epochs" => {
                    cfg.local_epochs = value.parse().map_err(|_| bad("local_epochs"))?
                }
                "batch" => cfg.batch = value.parse().map_err(|_| bad("batch"))?,
                "lr" => cfg.lr = value.parse().map_err(|_| bad("lr"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "model" => match value {
                    "logistic" | "mlp" => family = value.to_string(),
                    _ => return Err(bad("model (logistic|mlp)")),
                },
                "features" => features = value.parse().map_err(|_| bad("features"))?,
                "hidden" => hidden = value.parse().map_err(|_| bad("hidden"))?,
                "samples_per_client" => {
                    cfg.samples_per_client =
                        value.parse().map_err(|_| bad("samples_per_client"))?
                }
                "test_samples" => {
                    cfg.test_samples = value.parse().map_err(|_| bad("test_samples"))?
                }
                "label_skew" => cfg.label_skew = value.parse().map_err(|_| bad("label_skew"))?,
                _ => {
                    return Err(FlError::BadConfig(format!(
                        "line {}: unknown key `{key}`",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.model = match family.as_str() {
            "logistic" => ModelKind::Logistic { features },
            _ => ModelKind::Mlp { features, hidden },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes back to the flat-text form `parse` accepts.
    pub fn to_text(&self) -> String {
        let (family, features, hidden) = match self.model {
            ModelKind::Logistic { features } => ("logistic", features, 0),
            ModelKind::Mlp { features, hidden } => ("mlp", features, hidden),
        };
        let mut out = String::new();
        let _ = writeln!(out, "clients = {}", self.clients);
        let _ = writeln!(out, "rounds = {}", self.rounds);
        let _ = writeln!(out, "local_epochs = {}", self.local_epochs);
        let _ = writeln!(out, "batch = {}", self.batch);
        let _ = writeln!(out, "lr = {}", self.lr);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "model = {family}");
        let _ = writeln!(out, "features = {features}");
        if family == "mlp" {
            let _ = writeln!(out, "hidden = {hidden}");
        }
        let _ = writeln!(out, "samples_per_client = {}", self.samples_per_client);
        let _ = writeln!(out, "test_samples = {}", self.test_samples);
        let _ = writeln!(out, "label_skew = {}", self.label_skew);
        out
    }
}

/// One curve sample: test-set metrics after `round` aggregations.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub round: usize,
    pub mode: &'static str,
    pub accuracy: f64,
    pub loss: f64,
}

/// Paired training curves plus the config record they came from.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: String,
    pub curves: Vec<CurvePoint>,
}

impl ExperimentReport {
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("round,mode,accuracy,loss\n");
        for p in &self.curves {
            let _ = writeln!(out, "{},{},{:.6},{:.6}", p.round, p.mode, p.accuracy, p.loss);
        }
        out
    }

    /// Final test accuracy for one mode (round-0 value when rounds == 0).
    pub fn final_accuracy(&self, mode: &str) -> Option<f64> {
        self.curves
            .iter()
            .filter(|p| p.mode == mode)
            .max_by_key(|p| p.round)
            .map(|p| p.accuracy)
    }
}

fn flsim_digest(label: &str, seed: u64, a: u64, b: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    h.update(seed.to_le_bytes());
    h.update(a.to_le_bytes());
    h.update(b.to_le_bytes());
    h.finalize().into()
}

fn collect_round_updates(
    cfg: &FlConfig,
    data: &FederatedDataset,
    global: &ToyModel,
    round: usize,
) -> Result<BTreeMap<ClientId, Vec<f64>>, FlError> {
    let mut updates = BTreeMap::new();
    for (ci, shard) in data.shards.iter().enumerate() {
        // Seeded by (experiment, round, client) only: both modes train on
        // identical randomness, so any curve gap is the aggregation rule's.
        let mut rng = ChaCha20Rng::from_seed(flsim_digest(
            "flsim-local",
            cfg.seed,
            round as u64,
            ci as u64,
        ));
        let delta = local_train(global, shard, cfg.local_epochs, cfg.lr, cfg.batch, &mut rng)?;
        updates.insert(ci as ClientId, delta);
    }
    Ok(updates)
}

/// Trains both modes over the same data, initialization, and local rng
/// streams, recording test metrics each round. No dropouts here: the run
/// isolates quantization as the only plain-vs-masked difference.
pub fn run_experiment(cfg: &FlConfig) -> Result<ExperimentReport, FlError> {
    cfg.validate()?;
    let data = synth_dataset(
        cfg.model.features(),
        cfg.clients,
        cfg.samples_per_client,
        cfg.test_samples,
        cfg.label_skew,
        cfg.seed,
    );
    let mut init_rng =
        ChaCha20Rng::from_seed(flsim_digest("flsim-init", cfg.seed, 0, 0));
    let init = ToyModel::init(cfg.model, &mut init_rng);
    let engine = HmaEngine::new(HmaConfig::desk_default(
        cfg.clients,
        cfg.model.param_len(),
        flsim_digest("flsim-matrix", cfg.seed, 0, 0),
    ))?;
    let no_drops = DropoutSchedule::none();

    let mut curves = Vec::with_capacity(2 * (cfg.rounds + 1));
    for mode in ["plain", "sash"] {
        let mut model = init.clone();
        let (accuracy, loss) = model.accuracy_and_loss(&data.test);
        curves.push(CurvePoint { round: 0, mode, accuracy, loss });
        for round in 0..cfg.rounds {
            let updates = collect_round_updates(cfg, &data, &model, round)?;
            let global = match mode {
                "plain" => fedavg_round(&updates, AggMode::Plain { quant: &engine.config().quant })?,
                _ => fedavg_round(
                    &updates,
                    AggMode::Sash {
                        engine: &engine,
                        schedule: &no_drops,
                        run_seed: flsim_digest("flsim-epoch", cfg.seed, round as u64, 0),
                        epoch: round as u64,
                    },
                )?,
            };
            for (p, g) in model.params.iter_mut().zip(&global) {
                *p += g;
            }
            let (accuracy, loss) = model.accuracy_and_loss(&data.test);
            curves.push(CurvePoint { round: round + 1, mode, accuracy, loss });
        }
    }
    curves.sort_by_key(|p| (p.round, p.mode));
    Ok(ExperimentReport { config: cfg.to_text(), curves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_engine(n: usize, dim: usize, tag: u8) -> HmaEngine {
        HmaEngine::new(HmaConfig::desk_default(n, dim, [tag; 32])).unwrap()
    }

    fn random_updates(n: usize, dim: usize, span: f64, tag: u64) -> BTreeMap<ClientId, Vec<f64>> {
        let mut rng = ChaCha20Rng::from_seed(flsim_digest("flsim-test", tag, 0, 0));
        (0..n as ClientId)
            .map(|id| {
                let v = (0..dim).map(|_| rng.gen_range(-span..span)).collect();
                (id, v)
            })
            .collect()
    }

    /// Masked and plain averages may differ by one rounding step per client
    /// plus the demask correction spread over the survivor count.
    fn parity_bound(quant: &QuantConfig, n2: usize) -> f64 {
        let step = quant.step();
        2.0 * step + (n2 as f64 - 1.0) * step / n2 as f64
    }

    #[test]
    fn masked_average_matches_plain_within_quantization() {
        let engine = tiny_engine(5, 600, 1);
        let updates = random_updates(5, 600, 1.2, 7);
        let plain =
            fedavg_round(&updates, AggMode::Plain { quant: &engine.config().quant }).unwrap();
        let masked = fedavg_round(
            &updates,
            AggMode::Sash {
                engine: &engine,
                schedule: &DropoutSchedule::none(),
                run_seed: [9; 32],
                epoch: 0,
            },
        )
        .unwrap();
        let bound = parity_bound(&engine.config().quant, 5);
        for (i, (p, m)) in plain.iter().zip(&masked).enumerate() {
            assert!(
                (p - m).abs() <= bound,
                "coord {i}: plain {p:.6} vs masked {m:.6} exceeds {bound:.2e}"
            );
        }
    }

    #[test]
    fn identical_updates_survive_both_modes() {
        let engine = tiny_engine(4, 600, 2);
        let template: Vec<f64> = random_updates(1, 600, 0.9, 11)[&0].clone();
        let updates: BTreeMap<ClientId, Vec<f64>> =
            (0..4).map(|id| (id, template.clone())).collect();
        let plain =
            fedavg_round(&updates, AggMode::Plain { quant: &engine.config().quant }).unwrap();
        let masked = fedavg_round(
            &updates,
            AggMode::Sash {
                engine: &engine,
                schedule: &DropoutSchedule::none(),
                run_seed: [3; 32],
                epoch: 1,
            },
        )
        .unwrap();
        let bound = parity_bound(&engine.config().quant, 4);
        for ((p, m), t) in plain.iter().zip(&masked).zip(&template) {
            assert_eq!(p, t, "plain mean of identical updates is the update");
            assert!((m - t).abs() <= bound);
        }
    }

    #[test]
    fn dropout_shrinks_the_masked_average_to_survivors() {
        let engine = tiny_engine(5, 600, 3);
        let updates = random_updates(5, 600, 1.0, 23);
        // Client 0 uploads its masked vector, then dies during key agreement;
        // the run must settle on the other four.
        let schedule = DropoutSchedule::new([(0, 1)]).unwrap();
        let masked = fedavg_round(
            &updates,
            AggMode::Sash {
                engine: &engine,
                schedule: &schedule,
                run_seed: [5; 32],
                epoch: 0,
            },
        )
        .unwrap();
        let survivors: BTreeMap<ClientId, Vec<f64>> =
            updates.iter().filter(|(id, _)| **id != 0).map(|(i, v)| (*i, v.clone())).collect();
        let plain =
            fedavg_round(&survivors, AggMode::Plain { quant: &engine.config().quant }).unwrap();
        let bound = parity_bound(&engine.config().quant, 4);
        for (p, m) in plain.iter().zip(&masked) {
            assert!((p - m).abs() <= bound);
        }
    }

    #[test]
    fn ragged_updates_are_rejected() {
        let engine = tiny_engine(3, 600, 4);
        let mut updates = random_updates(3, 600, 0.5, 31);
        updates.get_mut(&1).unwrap().pop();
        let err =
            fedavg_round(&updates, AggMode::Plain { quant: &engine.config().quant }).unwrap_err();
        assert!(matches!(err, FlError::BadConfig(_)));
    }

    fn tiny_experiment() -> FlConfig {
        FlConfig {
            clients: 4,
            rounds: 3,
            local_epochs: 1,
            batch: 0,
            lr: 0.1,
            seed: 17,
            model: ModelKind::Logistic { features: 600 },
            samples_per_client: 30,
            test_samples: 200,
            label_skew: 0.0,
        }
    }

    #[test]
    fn zero_rounds_report_equal_initial_metrics() {
        let cfg = FlConfig { rounds: 0, ..tiny_experiment() };
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.curves.len(), 2);
        assert_eq!(report.curves[0].round, 0);
        assert_eq!(report.curves[0].accuracy, report.curves[1].accuracy);
        assert_eq!(report.curves[0].loss, report.curves[1].loss);
    }

    #[test]
    fn paired_curves_track_each_other() {
        let report = run_experiment(&tiny_experiment()).unwrap();
        assert_eq!(report.curves.len(), 8, "4 rounds x 2 modes including round 0");
        let plain = report.final_accuracy("plain").unwrap();
        let sash = report.final_accuracy("sash").unwrap();
        let initial = report.curves[0].accuracy;
        assert!(plain > initial + 0.1, "training should beat the zero model: {plain:.3}");
        assert!((plain - sash).abs() <= 0.03, "modes drifted: {plain:.3} vs {sash:.3}");
    }

    #[test]
    fn experiments_are_reproducible() {
        let cfg = FlConfig { rounds: 2, ..tiny_experiment() };
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.curves, b.curves);
        assert_eq!(a.config, b.config);
    }

    #[test]
    fn curves_csv_shape() {
        let cfg = FlConfig { rounds: 1, ..tiny_experiment() };
        let report = run_experiment(&cfg).unwrap();
        let csv = report.curves_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("round,mode,accuracy,loss"));
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().nth(1).unwrap().starts_with("0,plain,"));
        assert!(csv.lines().nth(2).unwrap().starts_with("0,sash,"));
    }

    #[test]
    fn config_round_trips_through_flat_text() {
        let cfg = FlConfig {
            model: ModelKind::Mlp { features: 600, hidden: 9 },
            label_skew: 0.25,
            ..tiny_experiment()
        };
        let parsed = FlConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn config_text_tolerates_comments_and_rejects_typos() {
        let cfg = FlConfig::parse("# experiment\n\nclients = 5\n  lr = 0.25\n").unwrap();
        assert_eq!(cfg.clients, 5);
        assert_eq!(cfg.lr, 0.25);
        assert_eq!(cfg.rounds, FlConfig::default().rounds);

        let err = FlConfig::parse("client = 5\n").unwrap_err();
        assert!(err.to_string().contains("unknown key"));
        let err = FlConfig::parse("lr = fast\n").unwrap_err();
        assert!(err.to_string().contains("bad lr"));
        let err = FlConfig::parse("just words\n").unwrap_err();
        assert!(err.to_string().contains("expected `key = value`"));
    }
}
