//! Temporal credit assignment and the SGD step.
//!
//! The loss is squared error between output spike times and dynamic
//! targets built from the earliest output spike. Gradients flow through
//! a surrogate: making a weight stronger can only make the postsynaptic
//! spike earlier, and only inputs that arrived by the (effective)
//! firing time participate. Deltas are L1-normalized at every layer to
//! keep step sizes comparable across depths.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::scalar::Scalar;
use crate::sim::{FiringTimes, LayerParams, LayerTrace, SimConfig};
use rand::Rng;

/// RNG stream ids carved out of one master seed (ChaCha streams).
/// Keeping every consumer on its own stream makes runs reproducible
/// even when stages are reordered or resumed: primary/secondary
/// network init, the fixed preview noise, standalone sample
/// generation, and a per-epoch family where epoch `e` shuffles with
/// stream `STREAM_EPOCH_BASE * (e + 1)` and draws training noise from
/// the stream right after it.
pub const STREAM_INIT_PRIMARY: u64 = 0;
pub const STREAM_INIT_SECONDARY: u64 = 1;
pub const STREAM_FIXED_NOISE: u64 = 2;
pub const STREAM_GENERATE: u64 = 3;
pub const STREAM_EPOCH_BASE: u64 = 4;

/// Desired first-spike time per output neuron.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetVector {
    targets: Vec<u32>,
}

impl TargetVector {
    pub fn new(targets: Vec<u32>, cfg: &SimConfig) -> Result<Self> {
        if let Some(&bad) = targets.iter().find(|&&t| t > cfg.sentinel()) {
            return Err(Error::InvalidParameter(format!(
                "target time {bad} exceeds sentinel {}",
                cfg.sentinel()
            )));
        }
        Ok(TargetVector { targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.targets
    }
}

/// Dynamic targets: the desired neuron should fire at the earliest
/// observed output time, every other neuron at the end of the window.
/// If nothing fired at all, the desired neuron is told to fire at step
/// 0, which makes the miss maximally expensive.
pub fn make_targets(
    firing: &FiringTimes,
    desired: usize,
    cfg: &SimConfig,
) -> Result<TargetVector> {
    if desired >= firing.len() {
        return Err(Error::DimMismatch {
            context: "desired class vs output count",
            expected: firing.len(),
            got: desired,
        });
    }
    let mut tau = firing.earliest(cfg);
    if tau == cfg.sentinel() {
        tau = 0;
    }
    let targets = (0..firing.len())
        .map(|j| if j == desired { tau } else { cfg.sentinel() })
        .collect();
    Ok(TargetVector { targets })
}

/// `0.5 * sum((t_j - target_j)^2)` over the output layer.
pub fn squared_temporal_loss<T: Scalar>(
    firing: &FiringTimes,
    targets: &TargetVector,
) -> Result<T> {
    if firing.len() != targets.len() {
        return Err(Error::DimMismatch {
            context: "loss firing vs targets",
            expected: targets.len(),
            got: firing.len(),
        });
    }
    let mut acc = T::zero();
    for (&t, &tgt) in firing.iter().zip(targets.as_slice()) {
        let e = T::from_i64(t as i64 - tgt as i64).expect("time diff fits scalar");
        acc += e * e;
    }
    Ok(acc / T::from_u8(2).unwrap())
}

/// Output-layer delta: the raw timing error `t_j - target_j`.
pub fn output_delta<T: Scalar>(firing: &FiringTimes, targets: &TargetVector) -> Result<Vec<T>> {
    if firing.len() != targets.len() {
        return Err(Error::DimMismatch {
            context: "delta firing vs targets",
            expected: targets.len(),
            got: firing.len(),
        });
    }
    Ok(firing
        .iter()
        .zip(targets.as_slice())
        .map(|(&t, &tgt)| T::from_i64(t as i64 - tgt as i64).expect("time diff fits scalar"))
        .collect())
}

/// Backpropagated delta for a layer below `params_next`: neuron `j`
/// collects error from every downstream neuron `k` it could have
/// influenced, i.e. where `t_j < t_k` strictly (silent neurons carry
/// the sentinel, which is the window length, so they influence nothing
/// and silent downstream neurons accept credit from any spike).
pub fn hidden_delta<T: Scalar>(
    delta_next: &[T],
    params_next: &LayerParams<T>,
    firing_this: &FiringTimes,
    firing_next: &FiringTimes,
) -> Result<Vec<T>> {
    if delta_next.len() != params_next.n_out() || firing_next.len() != params_next.n_out() {
        return Err(Error::DimMismatch {
            context: "downstream delta vs layer outputs",
            expected: params_next.n_out(),
            got: delta_next.len(),
        });
    }
    if firing_this.len() != params_next.n_in() {
        return Err(Error::DimMismatch {
            context: "upstream firing vs layer inputs",
            expected: params_next.n_in(),
            got: firing_this.len(),
        });
    }
    let mut delta = vec![T::zero(); params_next.n_in()];
    for (k, &dk) in delta_next.iter().enumerate() {
        if dk == T::zero() {
            continue;
        }
        let t_k = firing_next[k];
        let row = params_next.weights().row(k);
        for (j, d) in delta.iter_mut().enumerate() {
            if firing_this[j] < t_k {
                *d += dk * row[j];
            }
        }
    }
    Ok(delta)
}

/// Scale a delta vector to unit L1 norm, in place. An all-zero vector
/// is left untouched.
pub fn normalize_delta<T: Scalar>(delta: &mut [T]) {
    let norm = delta.iter().fold(T::zero(), |a, &d| a + d.abs());
    if norm == T::zero() {
        return;
    }
    for d in delta.iter_mut() {
        *d /= norm;
    }
}

/// Weight gradient of one layer from its normalized delta and trace:
/// `g[j][i] = -delta_j * [input i arrived by j's effective time]`.
pub fn weight_gradient<T: Scalar>(delta: &[T], trace: &LayerTrace) -> Result<Mat<T>> {
    let n_out = trace.outputs().len();
    let n_in = trace.inputs().len();
    if delta.len() != n_out {
        return Err(Error::DimMismatch {
            context: "delta vs layer outputs",
            expected: n_out,
            got: delta.len(),
        });
    }
    let mut grad = Mat::zeros(n_out, n_in);
    let inputs = trace.inputs().as_slice();
    for (j, &dj) in delta.iter().enumerate() {
        if dj == T::zero() {
            continue;
        }
        let neg = -dj;
        let eff = trace.effective_time(j);
        let row = grad.row_mut(j);
        for (g, &t_in) in row.iter_mut().zip(inputs) {
            let ind = T::from_u8((t_in <= eff) as u8).unwrap();
            *g = neg * ind;
        }
    }
    Ok(grad)
}

/// Per-layer weight gradients for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Mat<T>>,
}

/// Vanilla SGD with L2 shrinkage:
/// `w <- w - lr * (g + 2 * l2 * w)`. Fails if any weight goes
/// non-finite.
pub fn apply_sgd_update<T: Scalar>(
    params: &mut LayerParams<T>,
    grad: &Mat<T>,
    lr: T,
    l2: T,
) -> Result<()> {
    if grad.rows() != params.n_out() || grad.cols() != params.n_in() {
        return Err(Error::DimMismatch {
            context: "gradient vs weight shape",
            expected: params.n_out() * params.n_in(),
            got: grad.rows() * grad.cols(),
        });
    }
    let two_l2 = l2 + l2;
    let w = params.weights_mut().data_mut();
    for (w, &g) in w.iter_mut().zip(grad.data()) {
        let inner = g + two_l2 * *w;
        *w -= lr * inner;
        if !w.is_finite() {
            return Err(Error::Diverged(format!("non-finite weight {w}")));
        }
    }
    Ok(())
}

/// Normalized deltas for every layer, output side first computed from
/// the timing error, then chained downward with per-layer
/// renormalization. Index `l` of the result is the delta at the
/// *outputs* of layer `l`.
fn collect_deltas<T: Scalar>(
    top_delta_normalized: Vec<T>,
    layers: &[LayerParams<T>],
    traces: &[LayerTrace],
) -> Result<Vec<Vec<T>>> {
    let n = layers.len();
    let mut deltas = vec![Vec::new(); n];
    deltas[n - 1] = top_delta_normalized;
    for l in (0..n - 1).rev() {
        let mut d = hidden_delta(
            &deltas[l + 1],
            &layers[l + 1],
            traces[l].outputs(),
            traces[l + 1].outputs(),
        )?;
        normalize_delta(&mut d);
        deltas[l] = d;
    }
    Ok(deltas)
}

fn check_backward_shapes<T: Scalar>(
    traces: &[LayerTrace],
    layers: &[LayerParams<T>],
) -> Result<()> {
    if traces.len() != layers.len() || layers.is_empty() {
        return Err(Error::DimMismatch {
            context: "traces vs layers",
            expected: layers.len(),
            got: traces.len(),
        });
    }
    Ok(())
}

/// Full backward pass for one sample: timing error at the top,
/// L1-normalized deltas chained down, one gradient matrix per layer.
pub fn backward_pass<T: Scalar>(
    traces: &[LayerTrace],
    layers: &[LayerParams<T>],
    targets: &TargetVector,
) -> Result<Gradients<T>> {
    check_backward_shapes(traces, layers)?;
    let last = traces.last().expect("non-empty traces");
    let mut top = output_delta::<T>(last.outputs(), targets)?;
    normalize_delta(&mut top);
    backward_from_output_delta(top, traces, layers)
}

/// Backward pass that starts from an already-normalized delta at the
/// last layer's outputs. This is how error is pushed into a network
/// standing *below* another one (generator below discriminator).
pub fn backward_from_output_delta<T: Scalar>(
    top_delta_normalized: Vec<T>,
    traces: &[LayerTrace],
    layers: &[LayerParams<T>],
) -> Result<Gradients<T>> {
    check_backward_shapes(traces, layers)?;
    let deltas = collect_deltas(top_delta_normalized, layers, traces)?;
    let mut grads = Vec::with_capacity(layers.len());
    for (trace, delta) in traces.iter().zip(&deltas) {
        grads.push(weight_gradient(delta, trace)?);
    }
    Ok(Gradients { layers: grads })
}

/// Push a normalized output delta down *through* a frozen network:
/// returns the normalized delta at the inputs of `layers[0]`. Chaining
/// this with [`backward_from_output_delta`] on the network below gives
/// exactly the gradients a single concatenated backward pass would.
pub fn delta_through_network<T: Scalar>(
    top_delta_normalized: &[T],
    layers: &[LayerParams<T>],
    traces: &[LayerTrace],
) -> Result<Vec<T>> {
    check_backward_shapes(traces, layers)?;
    let mut delta = top_delta_normalized.to_vec();
    for l in (0..layers.len()).rev() {
        delta = hidden_delta(&delta, &layers[l], traces[l].inputs(), traces[l].outputs())?;
        normalize_delta(&mut delta);
    }
    Ok(delta)
}

/// Fused per-sample step: computes the delta chain, then updates each
/// layer in place. Numerically identical to [`backward_pass`] followed
/// by [`apply_sgd_update`] per layer, without materializing gradients.
pub fn train_step<T: Scalar>(
    layers: &mut [LayerParams<T>],
    traces: &[LayerTrace],
    targets: &TargetVector,
    lr: T,
    l2: T,
) -> Result<()> {
    check_backward_shapes(traces, layers)?;
    let last = traces.last().expect("non-empty traces");
    let mut top = output_delta::<T>(last.outputs(), targets)?;
    normalize_delta(&mut top);
    train_step_from_output_delta(layers, traces, top, lr, l2)
}

/// Fused step from an externally supplied normalized output delta
/// (generator update through a frozen discriminator).
pub fn train_step_from_output_delta<T: Scalar>(
    layers: &mut [LayerParams<T>],
    traces: &[LayerTrace],
    top_delta_normalized: Vec<T>,
    lr: T,
    l2: T,
) -> Result<()> {
    check_backward_shapes(traces, layers)?;
    let deltas = collect_deltas(top_delta_normalized, layers, traces)?;
    for ((params, trace), delta) in layers.iter_mut().zip(traces).zip(&deltas) {
        fused_layer_update(params, trace, delta, lr, l2)?;
    }
    Ok(())
}

/// `w <- w - lr * (-delta_j * ind + 2 * l2 * w)`, row by row, skipping
/// untouched rows when there is no shrinkage to apply.
fn fused_layer_update<T: Scalar>(
    params: &mut LayerParams<T>,
    trace: &LayerTrace,
    delta: &[T],
    lr: T,
    l2: T,
) -> Result<()> {
    if delta.len() != params.n_out() {
        return Err(Error::DimMismatch {
            context: "delta vs layer outputs",
            expected: params.n_out(),
            got: delta.len(),
        });
    }
    let two_l2 = l2 + l2;
    let inputs = trace.inputs().as_slice();
    for (j, &dj) in delta.iter().enumerate() {
        if dj == T::zero() && l2 == T::zero() {
            continue;
        }
        let neg = -dj;
        let eff = trace.effective_time(j);
        let row = params.weights_mut().row_mut(j);
        for (w, &t_in) in row.iter_mut().zip(inputs) {
            let ind = T::from_u8((t_in <= eff) as u8).unwrap();
            let inner = neg * ind + two_l2 * *w;
            *w -= lr * inner;
            if !w.is_finite() {
                return Err(Error::Diverged(format!("non-finite weight {w}")));
            }
        }
    }
    Ok(())
}

/// Training-loop hyperparameters shared by the classifier and both GAN
/// networks.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainHyper<T> {
    pub learning_rate: T,
    /// L2 penalty coefficient (the update applies `2 * l2 * w`).
    pub l2: T,
    pub epochs: u32,
    /// Multiplicative learning-rate decay factor.
    pub lr_decay: T,
    /// Apply the decay every this many epochs; 0 disables decay.
    pub lr_decay_every: u32,
    /// Samples per gradient estimate; 1 updates after every sample.
    pub batch_size: usize,
}

impl<T: Scalar> Default for TrainHyper<T> {
    fn default() -> Self {
        TrainHyper {
            learning_rate: T::from_f64_lossy(0.1),
            l2: T::from_f64_lossy(1e-6),
            epochs: 30,
            lr_decay: T::from_f64_lossy(0.7),
            lr_decay_every: 10,
            batch_size: 1,
        }
    }
}

impl<T: Scalar> TrainHyper<T> {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be finite and > 0, got {}",
                self.learning_rate
            )));
        }
        if !self.l2.is_finite() || self.l2 < T::zero() {
            return Err(Error::InvalidParameter(format!(
                "l2 must be finite and >= 0, got {}",
                self.l2
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be >= 1".into()));
        }
        if !self.lr_decay.is_finite() || self.lr_decay <= T::zero() || self.lr_decay > T::one() {
            return Err(Error::InvalidParameter(format!(
                "lr decay must lie in (0, 1], got {}",
                self.lr_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn lr_at(&self, epoch: u32) -> T {
        if self.lr_decay_every == 0 {
            return self.learning_rate;
        }
        let steps = epoch / self.lr_decay_every;
        let mut lr = self.learning_rate;
        for _ in 0..steps {
            lr *= self.lr_decay;
        }
        lr
    }
}

/// Weight-initialization family for one layer.
///
/// The family decides what a fresh neuron's firing depends on.
/// `Positive` weights make the crossing time a function of *how much*
/// total drive arrives — every input pushes the potential the same
/// way, so whether a neuron fires at all is nearly input-independent.
/// `Symmetric` weights make the running potential a signed walk whose
/// peak depends on *arrival order*, so which neurons fire varies from
/// sample to sample; hidden layers need that selectivity before
/// temporal credit assignment can shape them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightInit {
    /// Uniform over `[0, gain * theta / n_in)`: purely excitatory.
    Positive,
    /// Uniform over `(-gain * theta / n_in, gain * theta / n_in)`:
    /// balanced excitatory/inhibitory drive.
    Symmetric,
}

impl WeightInit {
    /// Parse the CLI/run-file spelling (`pos` / `sym`).
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pos" | "positive" => Ok(WeightInit::Positive),
            "sym" | "symmetric" => Ok(WeightInit::Symmetric),
            other => Err(Error::InvalidParameter(format!(
                "unknown weight init `{other}` (expected pos or sym)"
            ))),
        }
    }
}

/// Per-layer initialization recipe: firing threshold, weight family,
/// and scale (in units of `theta / n_in`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerInit<T> {
    pub theta: T,
    pub family: WeightInit,
    pub gain: f64,
}

impl<T: Scalar> LayerInit<T> {
    pub fn positive(theta: T, gain: f64) -> Self {
        LayerInit {
            theta,
            family: WeightInit::Positive,
            gain,
        }
    }

    pub fn symmetric(theta: T, gain: f64) -> Self {
        LayerInit {
            theta,
            family: WeightInit::Symmetric,
            gain,
        }
    }

    fn validate(&self) -> Result<f64> {
        if !self.gain.is_finite() || self.gain <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "init gain must be finite and > 0, got {}",
                self.gain
            )));
        }
        let theta_f = self.theta.to_f64().ok_or_else(|| {
            Error::InvalidParameter("threshold not representable as f64".into())
        })?;
        if !theta_f.is_finite() || theta_f <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "threshold must be finite and > 0, got {}",
                self.theta
            )));
        }
        Ok(theta_f)
    }
}

/// Fresh layer drawn from the given recipe. Both families consume
/// exactly one uniform draw per weight, so layer shapes alone fix the
/// RNG stream layout.
pub fn init_layer_with<T: Scalar, R: Rng + ?Sized>(
    n_out: usize,
    n_in: usize,
    spec: &LayerInit<T>,
    rng: &mut R,
) -> Result<LayerParams<T>> {
    if n_out == 0 || n_in == 0 {
        return Err(Error::InvalidParameter(
            "layer must have at least one input and one output".into(),
        ));
    }
    let theta_f = spec.validate()?;
    let scale = spec.gain * theta_f / n_in as f64;
    let draw: fn(f64, f64) -> f64 = match spec.family {
        WeightInit::Positive => |u, s| u * s,
        WeightInit::Symmetric => |u, s| (2.0 * u - 1.0) * s,
    };
    let data = (0..n_out * n_in)
        .map(|_| T::from_f64_lossy(draw(rng.random::<f64>(), scale)))
        .collect();
    LayerParams::new(Mat::from_vec(n_out, n_in, data)?, spec.theta)
}

/// Fresh layer with weights drawn uniformly from `[0, gain * theta / n_in)`.
///
/// Positive initialization guarantees early activity: with `gain` well
/// above 2, a typical input (roughly half the window's worth of
/// arrivals) drives the expected potential past the threshold, so
/// neurons fire from epoch 0 and gradients are never all-zero.
pub fn init_layer<T: Scalar, R: Rng + ?Sized>(
    n_out: usize,
    n_in: usize,
    theta: T,
    gain: f64,
    rng: &mut R,
) -> Result<LayerParams<T>> {
    init_layer_with(n_out, n_in, &LayerInit::positive(theta, gain), rng)
}

/// Initialize a stack with one recipe per weight layer; `arch` lists
/// layer widths input first, e.g. `[784, 400, 10]`.
pub fn init_network_with<T: Scalar, R: Rng + ?Sized>(
    arch: &[usize],
    specs: &[LayerInit<T>],
    rng: &mut R,
) -> Result<Vec<LayerParams<T>>> {
    if arch.len() < 2 {
        return Err(Error::InvalidParameter(
            "architecture needs at least input and output widths".into(),
        ));
    }
    if specs.len() != arch.len() - 1 {
        return Err(Error::DimMismatch {
            context: "init recipes vs weight layers",
            expected: arch.len() - 1,
            got: specs.len(),
        });
    }
    arch.windows(2)
        .zip(specs)
        .map(|(pair, spec)| init_layer_with(pair[1], pair[0], spec, rng))
        .collect()
}

/// Initialize a whole feed-forward stack with one shared positive
/// recipe; `arch` lists layer widths input first.
pub fn init_network<T: Scalar, R: Rng + ?Sized>(
    arch: &[usize],
    theta: T,
    gain: f64,
    rng: &mut R,
) -> Result<Vec<LayerParams<T>>> {
    if arch.len() < 2 {
        return Err(Error::InvalidParameter(
            "architecture needs at least input and output widths".into(),
        ));
    }
    let specs = vec![LayerInit::positive(theta, gain); arch.len() - 1];
    init_network_with(arch, &specs, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{layer_forward_event, network_forward};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg256() -> SimConfig {
        SimConfig::new(256).unwrap()
    }

    fn times(v: Vec<u32>) -> FiringTimes {
        FiringTimes::new(v, &cfg256()).unwrap()
    }

    fn layer(rows: usize, cols: usize, w: Vec<f64>, theta: f64) -> LayerParams<f64> {
        LayerParams::new(Mat::from_vec(rows, cols, w).unwrap(), theta).unwrap()
    }

    #[test]
    fn targets_follow_earliest_spike() {
        let cfg = cfg256();
        let t = make_targets(&times(vec![50, 80]), 0, &cfg).unwrap();
        assert_eq!(t.as_slice(), &[50, 256]);
        // Earliest spike belongs to the wrong neuron: it still sets the
        // target for the desired one.
        let t = make_targets(&times(vec![80, 50]), 0, &cfg).unwrap();
        assert_eq!(t.as_slice(), &[50, 256]);
    }

    #[test]
    fn targets_when_nothing_fired_demand_step_zero() {
        let cfg = cfg256();
        let t = make_targets(&FiringTimes::silent(2, &cfg), 0, &cfg).unwrap();
        assert_eq!(t.as_slice(), &[0, 256]);
    }

    #[test]
    fn targets_reject_bad_class() {
        let cfg = cfg256();
        assert!(make_targets(&times(vec![1, 2]), 2, &cfg).is_err());
    }

    #[test]
    fn loss_matches_hand_values() {
        let cfg = cfg256();
        let l: f64 = squared_temporal_loss(
            &FiringTimes::silent(1, &cfg),
            &TargetVector::new(vec![0], &cfg).unwrap(),
        )
        .unwrap();
        assert_eq!(l, 32_768.0); // 0.5 * 256^2
        let l: f64 = squared_temporal_loss(
            &times(vec![80]),
            &TargetVector::new(vec![256], &cfg).unwrap(),
        )
        .unwrap();
        assert_eq!(l, 15_488.0); // 0.5 * 176^2
    }

    #[test]
    fn normalize_examples() {
        let mut d = vec![2.0, -2.0];
        normalize_delta(&mut d);
        assert_eq!(d, vec![0.5, -0.5]);

        let mut d = vec![0.0, 0.0, 3.0];
        normalize_delta(&mut d);
        assert_eq!(d, vec![0.0, 0.0, 1.0]);

        let mut d = vec![0.0f64, 0.0];
        normalize_delta(&mut d);
        assert_eq!(d, vec![0.0, 0.0]); // zero norm: untouched

        let mut d = vec![1.0f64; 4];
        normalize_delta(&mut d);
        assert!(d.iter().all(|&x| x == 0.25));
    }

    #[test]
    fn sgd_update_hand_values() {
        let cfg = cfg256();
        // Pure shrinkage: w=1, g=0, l2=0.5, lr=0.1 -> 1 - 0.1*(0+1) = 0.9.
        let mut p = layer(1, 1, vec![1.0], 1.0);
        let g = Mat::from_vec(1, 1, vec![0.0]).unwrap();
        apply_sgd_update(&mut p, &g, 0.1, 0.5).unwrap();
        assert_eq!(p.weights()[(0, 0)], 0.9);
        // Pure gradient: w=0, g=-1 -> 0 - 0.1*(-1) = 0.1.
        let mut p = layer(1, 1, vec![0.0], 1.0);
        let g = Mat::from_vec(1, 1, vec![-1.0]).unwrap();
        apply_sgd_update(&mut p, &g, 0.1, 0.5).unwrap();
        assert_eq!(p.weights()[(0, 0)], 0.1);
        let _ = cfg;
    }

    #[test]
    fn sgd_update_reports_divergence() {
        let mut p = layer(1, 1, vec![1.0], 1.0);
        let g = Mat::from_vec(1, 1, vec![f64::INFINITY]).unwrap();
        assert!(matches!(
            apply_sgd_update(&mut p, &g, 0.1, 0.0),
            Err(Error::Diverged(_))
        ));
    }

    /// Two-input, two-hidden, two-output fixture worked out by hand.
    /// The traces are assembled from a forward pass of a network chosen
    /// so the times land exactly on the fixture values.
    #[test]
    fn backward_pass_matches_hand_fixture() {
        let cfg = cfg256();
        // Input spikes at 10 and 200. Hidden neuron 0 must fire at 50...
        // which a real single-layer pass cannot produce from these
        // inputs (potentials only move on arrivals), so this fixture
        // drives the *math* through traces built from layer passes with
        // inputs that do land on the fixture times.
        //
        // Layer 2 params (the hand fixture's numbers):
        let l2 = layer(2, 2, vec![2.0, -1.0, 0.5, 3.0], 100.0);
        // Build the layer-2 trace from a real event pass: hidden times
        // [50, 256] -> we need output times [120, 256]. No single-spike
        // IF neuron can fire at 120 from inputs at 50/256, so instead we
        // verify the pieces (delta chain and gradients) directly.
        let hidden = times(vec![50, 256]);
        let out = times(vec![120, 256]);
        let targets = make_targets(&out, 1, &cfg).unwrap();
        assert_eq!(targets.as_slice(), &[256, 120]);

        let loss: f64 = squared_temporal_loss(&out, &targets).unwrap();
        assert_eq!(loss, 18_496.0); // 136^2

        let mut d_out: Vec<f64> = output_delta(&out, &targets).unwrap();
        assert_eq!(d_out, vec![-136.0, 136.0]);
        normalize_delta(&mut d_out);
        assert_eq!(d_out, vec![-0.5, 0.5]);

        let d_hidden = hidden_delta(&d_out, &l2, &hidden, &out).unwrap();
        // j=0: -0.5*2 (k=0, 50<120) + 0.5*0.5 (k=1, 50<256) = -0.75
        // j=1: silent, influences nothing.
        assert_eq!(d_hidden, vec![-0.75, 0.0]);
        let mut d_hidden = d_hidden;
        normalize_delta(&mut d_hidden);
        assert_eq!(d_hidden, vec![-1.0, 0.0]);
    }

    #[test]
    fn strict_causality_in_hidden_delta() {
        let cfg = cfg256();
        let l = layer(1, 1, vec![5.0], 100.0);
        // Same firing step: no credit flows.
        let d = hidden_delta(&[1.0], &l, &times(vec![30]), &times(vec![30])).unwrap();
        assert_eq!(d, vec![0.0]);
        // One step earlier: full credit.
        let d = hidden_delta(&[1.0], &l, &times(vec![29]), &times(vec![30])).unwrap();
        assert_eq!(d, vec![5.0]);
        let _ = cfg;
    }

    #[test]
    fn gradient_rows_follow_causality_window() {
        let cfg = cfg256();
        let p = layer(2, 2, vec![150.0, 150.0, -1.0, -1.0], 100.0);
        let inputs = times(vec![3, 200]);
        let trace = layer_forward_event(&p, &inputs, &cfg, false).unwrap();
        assert_eq!(trace.outputs().as_slice(), &[3, 256]);
        let g = weight_gradient(&[-0.5, 0.5], &trace).unwrap();
        // Neuron 0 fired at 3: only input 0 (t=3) is inside its window.
        assert_eq!(g.row(0), &[0.5, 0.0]);
        // Neuron 1 silent: whole window, both inputs count.
        assert_eq!(g.row(1), &[-0.5, -0.5]);
        // Zero delta leaves the row zero.
        let g = weight_gradient(&[0.0, 1.0], &trace).unwrap();
        assert_eq!(g.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn end_to_end_backward_on_real_forward_pass() {
        let cfg = cfg256();
        // 2-2-2 network with all-positive first layer so both hidden
        // neurons fire, and a mixed second layer.
        let l1 = layer(2, 2, vec![120.0, 30.0, 20.0, 110.0], 100.0);
        let l2 = layer(2, 2, vec![130.0, 10.0, -5.0, 140.0], 100.0);
        let inputs = times(vec![4, 9]);
        let layers = vec![l1, l2];
        let pass = network_forward(&layers, &inputs, &cfg).unwrap();
        // h0: 120 at t=4 -> fires at 4. h1: 20 at 4, +110 at 9 -> 9.
        assert_eq!(pass.traces[0].outputs().as_slice(), &[4, 9]);
        // o0: 130 at 4 -> fires at 4. o1: -5 at 4, +140 at 9 -> 9.
        assert_eq!(pass.output_times().as_slice(), &[4, 9]);

        let targets = make_targets(pass.output_times(), 1, &cfg).unwrap();
        assert_eq!(targets.as_slice(), &[256, 4]);
        let grads = backward_pass(&pass.traces, &layers, &targets).unwrap();

        // Output deltas: [4-256, 9-4] = [-252, 5] -> [-252/257, 5/257].
        let d0 = -252.0 / 257.0;
        let d1 = 5.0 / 257.0;
        // o0 fired at 4: only h0 inside window. o1 fired at 9: both.
        assert_eq!(grads.layers[1].row(0), &[-d0, 0.0]);
        assert_eq!(grads.layers[1].row(1), &[-d1, -d1]);

        // Hidden deltas before normalization:
        // h0 (t=4): k=0 fired at 4, not strictly later, no credit;
        //           k=1 fired at 9 -> d1 * w[1][0] = (5/257)*(-5).
        // h1 (t=9): nothing downstream fires strictly later.
        // Normalized: [-1, 0]; grad row 0 = -(-1) * ind = +ind, and
        // h0 fired at 4 so only input 0 (t=4) is inside its window.
        let g1 = &grads.layers[0];
        assert_eq!(g1.row(0), &[1.0, 0.0]);
        assert_eq!(g1.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn fused_step_equals_compose() {
        let cfg = cfg256();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let layers = init_network::<f64, _>(&[6, 5, 4], 100.0, 8.0, &mut rng).unwrap();
            let input_times: Vec<u32> =
                (0..6).map(|_| rng.random_range(0..=cfg.sentinel())).collect();
            let inputs = FiringTimes::new(input_times, &cfg).unwrap();
            let pass = network_forward(&layers, &inputs, &cfg).unwrap();
            let targets = make_targets(pass.output_times(), 2, &cfg).unwrap();

            let mut via_compose = layers.clone();
            let grads = backward_pass(&pass.traces, &via_compose, &targets).unwrap();
            for (p, g) in via_compose.iter_mut().zip(&grads.layers) {
                apply_sgd_update(p, g, 0.05, 1e-4).unwrap();
            }

            let mut via_fused = layers.clone();
            train_step(&mut via_fused, &pass.traces, &targets, 0.05, 1e-4).unwrap();

            for (a, b) in via_compose.iter().zip(&via_fused) {
                assert_eq!(a.weights().data(), b.weights().data());
            }
        }
    }

    #[test]
    fn split_backward_equals_concatenated_backward() {
        // Gradients for the lower stack must be identical whether the
        // two stacks are backpropagated as one network or via
        // delta_through_network + backward_from_output_delta.
        let cfg = cfg256();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let lower = init_network::<f64, _>(&[5, 7, 6], 100.0, 8.0, &mut rng).unwrap();
            let upper = init_network::<f64, _>(&[6, 4, 3], 100.0, 8.0, &mut rng).unwrap();
            let input_times: Vec<u32> =
                (0..5).map(|_| rng.random_range(0..=cfg.sentinel())).collect();
            let inputs = FiringTimes::new(input_times, &cfg).unwrap();

            let mut all: Vec<_> = lower.to_vec();
            all.extend(upper.iter().cloned());
            let pass = network_forward(&all, &inputs, &cfg).unwrap();
            let targets = make_targets(pass.output_times(), 1, &cfg).unwrap();
            let concat = backward_pass(&pass.traces, &all, &targets).unwrap();

            let lower_traces = &pass.traces[..lower.len()];
            let upper_traces = &pass.traces[lower.len()..];
            let mut top: Vec<f64> =
                output_delta(pass.output_times(), &targets).unwrap();
            normalize_delta(&mut top);
            let boundary = delta_through_network(&top, &upper, upper_traces).unwrap();
            let split =
                backward_from_output_delta(boundary, lower_traces, &lower).unwrap();

            for (a, b) in concat.layers[..lower.len()].iter().zip(&split.layers) {
                assert_eq!(a.data(), b.data());
            }
        }
    }

    #[test]
    fn lr_schedule_decays_stepwise() {
        let h = TrainHyper::<f64> {
            learning_rate: 1.0,
            lr_decay: 0.5,
            lr_decay_every: 10,
            ..TrainHyper::default()
        };
        assert_eq!(h.lr_at(0), 1.0);
        assert_eq!(h.lr_at(9), 1.0);
        assert_eq!(h.lr_at(10), 0.5);
        assert_eq!(h.lr_at(25), 0.25);
        let flat = TrainHyper::<f64> {
            lr_decay_every: 0,
            ..TrainHyper::default()
        };
        assert_eq!(flat.lr_at(100), flat.learning_rate);
    }

    #[test]
    fn init_layer_is_positive_and_scaled() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = init_layer::<f64, _>(10, 20, 100.0, 8.0, &mut rng).unwrap();
        let bound = 8.0 * 100.0 / 20.0;
        assert!(p
            .weights()
            .data()
            .iter()
            .all(|&w| (0.0..bound).contains(&w)));
        assert!(init_layer::<f64, _>(1, 1, 100.0, 0.0, &mut rng).is_err());
        assert!(init_network::<f64, _>(&[5], 100.0, 8.0, &mut rng).is_err());
    }

    #[test]
    fn hyper_validation_catches_bad_values() {
        let mut h = TrainHyper::<f64>::default();
        assert!(h.validate().is_ok());
        h.learning_rate = 0.0;
        assert!(h.validate().is_err());
        h = TrainHyper::default();
        h.lr_decay = 1.5;
        assert!(h.validate().is_err());
        h = TrainHyper::default();
        h.batch_size = 0;
        assert!(h.validate().is_err());
    }
}
