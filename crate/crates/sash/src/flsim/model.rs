//! Toy classifiers with hand-written gradients.
//!
//! Two families: logistic regression and a one-hidden-layer tanh MLP, both
//! over a flat `Vec<f64>` parameter vector so a whole model update can ride
//! through aggregation as one client vector. Gradients are exact (the tests
//! hold them against central differences), losses are mean cross-entropy.

use rand::Rng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::data::Sample;
use super::FlError;

/// Model family plus shape. Parameter layout is flat:
/// logistic is `[w(features), b]`; the MLP is `[W1 row-major
/// (hidden x features), b1(hidden), w2(hidden), b2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Logistic { features: usize },
    Mlp { features: usize, hidden: usize },
}

impl ModelKind {
    pub fn features(&self) -> usize {
        match *self {
            ModelKind::Logistic { features } => features,
            ModelKind::Mlp { features, .. } => features,
        }
    }

    pub fn param_len(&self) -> usize {
        match *self {
            ModelKind::Logistic { features } => features + 1,
            ModelKind::Mlp { features, hidden } => hidden * (features + 1) + hidden + 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyModel {
    pub kind: ModelKind,
    pub params: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Cross-entropy of label `y` under logit `z`, written so large |z| cannot
/// overflow: max(z,0) - z*y + ln(1 + e^-|z|).
fn xent(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl ToyModel {
    /// All-zero parameters. The canonical start for logistic regression;
    /// fine for tests that only need a fixed point.
    pub fn zeroed(kind: ModelKind) -> ToyModel {
        ToyModel { kind, params: vec![0.0; kind.param_len()] }
    }

    /// Zero init for logistic; scaled Gaussian init for the MLP, which needs
    /// broken symmetry before its hidden units can specialize.
    pub fn init(kind: ModelKind, rng: &mut ChaCha20Rng) -> ToyModel {
        match kind {
            ModelKind::Logistic { .. } => ToyModel::zeroed(kind),
            ModelKind::Mlp { features, hidden } => {
                let scale = 1.0 / (features as f64).sqrt();
                let mut params = vec![0.0; kind.param_len()];
                for p in params.iter_mut().take(hidden * features) {
                    *p = scale * rng.sample::<f64, _>(StandardNormal);
                }
                ToyModel { kind, params }
            }
        }
    }

    fn logit(&self, x: &[f64], hidden_out: Option<&mut Vec<f64>>) -> f64 {
        match self.kind {
            ModelKind::Logistic { features } => {
                let (w, b) = self.params.split_at(features);
                w.iter().zip(x).map(|(wj, xj)| wj * xj).sum::<f64>() + b[0]
            }
            ModelKind::Mlp { features, hidden } => {
                let w1 = &self.params[..hidden * features];
                let b1 = &self.params[hidden * features..hidden * features + hidden];
                let w2 = &self.params[hidden * features + hidden..hidden * features + 2 * hidden];
                let b2 = self.params[hidden * features + 2 * hidden];
                let mut z = b2;
                let mut acts = hidden_out;
                for k in 0..hidden {
                    let row = &w1[k * features..(k + 1) * features];
                    let pre = row.iter().zip(x).map(|(wj, xj)| wj * xj).sum::<f64>() + b1[k];
                    let a = pre.tanh();
                    if let Some(out) = acts.as_deref_mut() {
                        out.push(a);
                    }
                    z += w2[k] * a;
                }
                z
            }
        }
    }

    /// Mean loss and mean gradient over `shard[idx]` for each idx in `batch`.
    pub fn loss_and_grad(&self, shard: &[Sample], batch: &[usize]) -> (f64, Vec<f64>) {
        assert!(!batch.is_empty(), "gradient of an empty batch is undefined");
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let inv = 1.0 / batch.len() as f64;
        let mut acts = Vec::new();
        for &i in batch {
            let s = &shard[i];
            let y = f64::from(s.y);
            match self.kind {
                ModelKind::Logistic { features } => {
                    let z = self.logit(&s.x, None);
                    loss += xent(z, y) * inv;
                    let d = (sigmoid(z) - y) * inv;
                    for (g, xj) in grad[..features].iter_mut().zip(&s.x) {
                        *g += d * xj;
                    }
                    grad[features] += d;
                }
                ModelKind::Mlp { features, hidden } => {
                    acts.clear();
                    let z = self.logit(&s.x, Some(&mut acts));
                    loss += xent(z, y) * inv;
                    let dz2 = (sigmoid(z) - y) * inv;
                    let w2 = &self.params[hidden * features + hidden..hidden * features + 2 * hidden];
                    let (gw1, rest) = grad.split_at_mut(hidden * features);
                    let (gb1, rest) = rest.split_at_mut(hidden);
                    let (gw2, gb2) = rest.split_at_mut(hidden);
                    gb2[0] += dz2;
                    for k in 0..hidden {
                        let a = acts[k];
                        gw2[k] += dz2 * a;
                        let dpre = dz2 * w2[k] * (1.0 - a * a);
                        gb1[k] += dpre;
                        for (g, xj) in gw1[k * features..(k + 1) * features].iter_mut().zip(&s.x) {
                            *g += dpre * xj;
                        }
                    }
                }
            }
        }
        (loss, grad)
    }

    /// Accuracy and mean loss over a labeled set.
    pub fn accuracy_and_loss(&self, data: &[Sample]) -> (f64, f64) {
        assert!(!data.is_empty(), "evaluating on an empty set is meaningless");
        let mut correct = 0usize;
        let mut loss = 0.0;
        for s in data {
            let z = self.logit(&s.x, None);
            loss += xent(z, f64::from(s.y));
            if (z >= 0.0) == (s.y == 1) {
                correct += 1;
            }
        }
        let n = data.len() as f64;
        (correct as f64 / n, loss / n)
    }
}

/// Runs `epochs` of minibatch gradient descent from `model` on one shard and
/// returns the parameter delta. `batch == 0` means full-batch. Zero epochs
/// return the zero vector. A non-finite loss or parameter aborts with
/// `FlError::Diverged` rather than shipping poison into aggregation.
pub fn local_train(
    model: &ToyModel,
    shard: &[Sample],
    epochs: usize,
    lr: f64,
    batch: usize,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<f64>, FlError> {
    if shard.is_empty() {
        return Err(FlError::BadConfig("cannot train on an empty shard".into()));
    }
    let mut local = model.clone();
    let b = if batch == 0 { shard.len() } else { batch.min(shard.len()) };
    let mut order: Vec<usize> = (0..shard.len()).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(b) {
            let (loss, grad) = local.loss_and_grad(shard, chunk);
            if !loss.is_finite() {
                return Err(FlError::Diverged);
            }
            for (p, g) in local.params.iter_mut().zip(&grad) {
                *p -= lr * g;
            }
        }
    }
    let delta: Vec<f64> = local
        .params
        .iter()
        .zip(&model.params)
        .map(|(after, before)| after - before)
        .collect();
    if delta.iter().any(|d| !d.is_finite()) {
        return Err(FlError::Diverged);
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flsim::data::synth_dataset;
    use rand::SeedableRng;

    fn rng(tag: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(tag)
    }

    fn random_model(kind: ModelKind, r: &mut ChaCha20Rng) -> ToyModel {
        let mut m = ToyModel::init(kind, r);
        for p in m.params.iter_mut() {
            *p = 0.5 * r.sample::<f64, _>(StandardNormal);
        }
        m
    }

    fn check_grad_against_central_difference(kind: ModelKind) {
        let mut r = rng(kind.param_len() as u64);
        let ds = synth_dataset(kind.features(), 1, 16, 1, 0.0, 5);
        let shard = &ds.shards[0];
        let batch: Vec<usize> = (0..shard.len()).collect();
        let model = random_model(kind, &mut r);
        let (_, grad) = model.loss_and_grad(shard, &batch);

        let mut checked = 0;
        while checked < 20 {
            let i = r.gen_range(0..model.params.len());
            if grad[i].abs() < 1e-6 {
                continue;
            }
            let h = 1e-5 * model.params[i].abs().max(1.0);
            let mut plus = model.clone();
            plus.params[i] += h;
            let mut minus = model.clone();
            minus.params[i] -= h;
            let (lp, _) = plus.loss_and_grad(shard, &batch);
            let (lm, _) = minus.loss_and_grad(shard, &batch);
            let numeric = (lp - lm) / (2.0 * h);
            let rel = (numeric - grad[i]).abs() / grad[i].abs().max(1e-12);
            assert!(
                rel < 1e-4,
                "coord {i}: analytic {:.3e} vs numeric {numeric:.3e} (rel {rel:.2e})",
                grad[i]
            );
            checked += 1;
        }
    }

    #[test]
    fn logistic_gradient_matches_central_difference() {
        check_grad_against_central_difference(ModelKind::Logistic { features: 30 });
    }

    #[test]
    fn mlp_gradient_matches_central_difference() {
        check_grad_against_central_difference(ModelKind::Mlp { features: 12, hidden: 5 });
    }

    #[test]
    fn zero_epochs_yield_zero_update() {
        let ds = synth_dataset(10, 1, 12, 1, 0.0, 2);
        let model = ToyModel::zeroed(ModelKind::Logistic { features: 10 });
        let delta = local_train(&model, &ds.shards[0], 0, 0.5, 0, &mut rng(1)).unwrap();
        assert!(delta.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn loss_decreases_on_separable_shard() {
        let ds = synth_dataset(20, 1, 40, 1, 0.0, 8);
        let shard = &ds.shards[0];
        let kind = ModelKind::Logistic { features: 20 };
        let model = ToyModel::zeroed(kind);
        let (_, loss_before) = model.accuracy_and_loss(shard);
        let delta = local_train(&model, shard, 5, 0.5, 0, &mut rng(3)).unwrap();
        let mut trained = model.clone();
        for (p, d) in trained.params.iter_mut().zip(&delta) {
            *p += d;
        }
        let (acc_after, loss_after) = trained.accuracy_and_loss(shard);
        assert!(
            loss_after < loss_before * 0.5,
            "five epochs should at least halve the loss: {loss_before:.4} -> {loss_after:.4}"
        );
        assert!(acc_after > 0.9, "shard accuracy {acc_after:.3} after training");
    }

    #[test]
    fn minibatch_training_also_learns() {
        let ds = synth_dataset(16, 1, 48, 1, 0.0, 13);
        let shard = &ds.shards[0];
        let kind = ModelKind::Mlp { features: 16, hidden: 6 };
        let model = ToyModel::init(kind, &mut rng(7));
        let (_, loss_before) = model.accuracy_and_loss(shard);
        let delta = local_train(&model, shard, 10, 0.3, 8, &mut rng(9)).unwrap();
        let mut trained = model.clone();
        for (p, d) in trained.params.iter_mut().zip(&delta) {
            *p += d;
        }
        let (_, loss_after) = trained.accuracy_and_loss(shard);
        assert!(loss_after < loss_before, "{loss_before:.4} -> {loss_after:.4}");
    }

    #[test]
    fn divergence_is_reported_not_propagated() {
        let ds = synth_dataset(6, 1, 10, 1, 0.0, 4);
        let mut model = ToyModel::zeroed(ModelKind::Logistic { features: 6 });
        model.params[0] = f64::INFINITY;
        let err = local_train(&model, &ds.shards[0], 1, 0.1, 0, &mut rng(2)).unwrap_err();
        assert!(matches!(err, FlError::Diverged));
    }

    #[test]
    fn param_layout_lengths() {
        assert_eq!(ModelKind::Logistic { features: 1500 }.param_len(), 1501);
        assert_eq!(ModelKind::Mlp { features: 48, hidden: 16 }.param_len(), 16 * 49 + 17);
    }
}
