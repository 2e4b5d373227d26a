//! The composed calibration model: a sigmoid gate over a linear layer
//! (embedding layer), a cheap fully-connected branch, and a high-accuracy
//! component branch with a pluggable recurrent or attention core.
//!
//! Top-down inference evaluates the gate first and then runs exactly one
//! branch; the unselected branch is never executed. Per-branch execution
//! counters back that claim in tests.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::act::{leaky_relu, leaky_relu_grad, sigmoid, LEAKY_SLOPE};
use crate::nn::attention::AttentionParams;
use crate::nn::dense::{Dense, DenseGrads};
use crate::nn::gru::GruParams;
use crate::nn::lstm::LstmParams;
use crate::nn::FlatParams;
use crate::scalar::Scalar;

/// Which high-accuracy core the component branch wraps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoreKind {
    Lstm,
    Gru,
    Attention,
}

impl fmt::Display for CoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoreKind::Lstm => "lstm",
            CoreKind::Gru => "gru",
            CoreKind::Attention => "attention",
        })
    }
}

impl FromStr for CoreKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(CoreKind::Lstm),
            "gru" => Ok(CoreKind::Gru),
            "attention" => Ok(CoreKind::Attention),
            other => Err(Error::invalid(format!("unknown core kind `{other}`"))),
        }
    }
}

/// Sigmoid gate over one linear layer; classifies a window as stable
/// (low output, linear branch) or unstable (high output, component branch).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingLayer<T> {
    pub linear: Dense<T>, // N -> 1
}

impl<T: Scalar> EmbeddingLayer<T> {
    pub fn logit(&self, window: &[T]) -> T {
        self.linear.forward(window)[0]
    }

    pub fn gate_value(&self, window: &[T]) -> T {
        sigmoid(self.logit(window))
    }
}

impl<T: Scalar> FlatParams<T> for EmbeddingLayer<T> {
    fn param_count(&self) -> usize {
        self.linear.param_count()
    }
    fn write_flat(&self, out: &mut Vec<T>) {
        self.linear.write_flat(out)
    }
    fn read_flat(&mut self, src: &[T], pos: &mut usize) {
        self.linear.read_flat(src, pos)
    }
}

/// Cheap branch: fc_out ∘ leakyReLU ∘ fc_in.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBranch<T> {
    pub fc_in: Dense<T>,  // N -> h_lin
    pub fc_out: Dense<T>, // h_lin -> 1
}

pub struct LinearBranchCache<T> {
    pub pre: Vec<T>,
    pub hidden: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct LinearBranchGrads<T> {
    pub fc_in: DenseGrads<T>,
    pub fc_out: DenseGrads<T>,
}

impl<T: Scalar> LinearBranch<T> {
    pub fn forward(&self, window: &[T]) -> T {
        self.forward_cached(window).0
    }

    pub fn forward_cached(&self, window: &[T]) -> (T, LinearBranchCache<T>) {
        let slope = T::from_f64(LEAKY_SLOPE);
        let pre = self.fc_in.forward(window);
        let hidden: Vec<T> = pre.iter().map(|v| leaky_relu(*v, slope)).collect();
        (self.fc_out.forward(&hidden)[0], LinearBranchCache { pre, hidden })
    }

    /// Accumulates parameter grads for a scalar output gradient.
    pub fn backward(
        &self,
        window: &[T],
        cache: &LinearBranchCache<T>,
        grad_out: T,
        grads: &mut LinearBranchGrads<T>,
    ) {
        let slope = T::from_f64(LEAKY_SLOPE);
        let d_hidden = self.fc_out.backward(&cache.hidden, &[grad_out], &mut grads.fc_out);
        let d_pre: Vec<T> = d_hidden
            .iter()
            .zip(cache.pre.iter())
            .map(|(g, p)| *g * leaky_relu_grad(*p, slope))
            .collect();
        self.fc_in.backward(window, &d_pre, &mut grads.fc_in);
    }

    pub fn grads_like(&self) -> LinearBranchGrads<T> {
        LinearBranchGrads {
            fc_in: self.fc_in.grads_like(),
            fc_out: self.fc_out.grads_like(),
        }
    }

    pub fn mac_count(&self) -> u64 {
        self.fc_in.mac_count() + self.fc_out.mac_count()
    }
}

impl<T: Scalar> FlatParams<T> for LinearBranch<T> {
    fn param_count(&self) -> usize {
        self.fc_in.param_count() + self.fc_out.param_count()
    }
    fn write_flat(&self, out: &mut Vec<T>) {
        self.fc_in.write_flat(out);
        self.fc_out.write_flat(out);
    }
    fn read_flat(&mut self, src: &[T], pos: &mut usize) {
        self.fc_in.read_flat(src, pos);
        self.fc_out.read_flat(src, pos);
    }
}

impl<T: Scalar> FlatParams<T> for LinearBranchGrads<T> {
    fn param_count(&self) -> usize {
        self.fc_in.param_count() + self.fc_out.param_count()
    }
    fn write_flat(&self, out: &mut Vec<T>) {
        self.fc_in.write_flat(out);
        self.fc_out.write_flat(out);
    }
    fn read_flat(&mut self, src: &[T], pos: &mut usize) {
        self.fc_in.read_flat(src, pos);
        self.fc_out.read_flat(src, pos);
    }
}

/// Pluggable high-accuracy core.
#[derive(Debug, Clone, PartialEq)]
pub enum Core<T> {
    Lstm(LstmParams<T>),
    Gru(GruParams<T>),
    Attention(AttentionParams<T>),
}

impl<T: Scalar> Core<T> {
    pub fn kind(&self) -> CoreKind {
        match self {
            Core::Lstm(_) => CoreKind::Lstm,
            Core::Gru(_) => CoreKind::Gru,
            Core::Attention(_) => CoreKind::Attention,
        }
    }

    pub fn input_size(&self) -> usize {
        match self {
            Core::Lstm(p) => p.input_size,
            Core::Gru(p) => p.input_size,
            Core::Attention(p) => p.model_size,
        }
    }

    pub fn output_size(&self) -> usize {
        match self {
            Core::Lstm(p) => p.hidden_size,
            Core::Gru(p) => p.hidden_size,
            Core::Attention(p) => p.model_size,
        }
    }

    pub fn forward(&self, seq: &[Vec<T>]) -> Vec<T> {
        match self {
            Core::Lstm(p) => p.forward(seq).0,
            Core::Gru(p) => p.forward(seq).0,
            Core::Attention(p) => p.forward(seq).0,
        }
    }

    pub fn mac_count(&self, seq_len: usize) -> u64 {
        match self {
            Core::Lstm(p) => p.mac_count(seq_len),
            Core::Gru(p) => p.mac_count(seq_len),
            Core::Attention(p) => p.mac_count(seq_len),
        }
    }
}

impl<T: Scalar> FlatParams<T> for Core<T> {
    fn param_count(&self) -> usize {
        match self {
            Core::Lstm(p) => p.param_count(),
            Core::Gru(p) => p.param_count(),
            Core::Attention(p) => p.param_count(),
        }
    }
    fn write_flat(&self, out: &mut Vec<T>) {
        match self {
            Core::Lstm(p) => p.write_flat(out),
            Core::Gru(p) => p.write_flat(out),
            Core::Attention(p) => p.write_flat(out),
        }
    }
    fn read_flat(&mut self, src: &[T], pos: &mut usize) {
        match self {
            Core::Lstm(p) => p.read_flat(src, pos),
            Core::Gru(p) => p.read_flat(src, pos),
            Core::Attention(p) => p.read_flat(src, pos),
        }
    }
}

/// Per-core forward caches for backprop.
pub enum CoreCache<T> {
    Lstm(crate::nn::lstm::LstmCache<T>),
    Gru(crate::nn::gru::GruCache<T>),
    Attention(crate::nn::attention::AttentionCache<T>),
}

/// Per-core parameter gradients, flat order mirroring [`Core`].
pub enum CoreGrads<T> {
    Lstm(LstmParams<T>),
    Gru(GruParams<T>),
    Attention(crate::nn::attention::AttentionGrads<T>),
}

impl<T: Scalar> FlatParams<T> for CoreGrads<T> {
    fn param_count(&self) -> usize {
        match self {
            CoreGrads::Lstm(p) => p.param_count(),
            CoreGrads::Gru(p) => p.param_count(),
            CoreGrads::Attention(p) => p.param_count(),
        }
    }
    fn write_flat(&self, out: &mut Vec<T>) {
        match self {
            CoreGrads::Lstm(p) => p.write_flat(out),
            CoreGrads::Gru(p) => p.write_flat(out),
            CoreGrads::Attention(p) => p.write_flat(out),
        }
    }
    fn read_flat(&mut self, src: &[T], pos: &mut usize) {
        match self {
            CoreGrads::Lstm(p) => p.read_flat(src, pos),
            CoreGrads::Gru(p) => p.read_flat(src, pos),
            CoreGrads::Attention(p) => p.read_flat(src, pos),
        }
    }
}

pub struct ComponentCache<T> {
    pub seq: Vec<Vec<T>>,
    pub core: CoreCache<T>,
    pub features: Vec<T>,
}

pub struct ComponentGrads<T> {
    pub fc_in: DenseGrads<T>,
    pub core: CoreGrads<T>,
    pub fc_out: DenseGrads<T>,
}

impl<T: Scalar> FlatParams<T> for ComponentGrads<T> {
    fn param_count(&self) -> usize {
        self.fc_in.param_count() + self.core.param_count() + self.fc_out.param_count()
    }
    fn write_flat(&self, out: &mut Vec<T>) {
        self.fc_in.write_flat(out);
        self.core.write_flat(out);
        self.fc_out.write_flat(out);
    }
    fn read_flat(&mut self, src: &[T], pos: &mut usize) {
        self.fc_in.read_flat(src, pos);
        self.core.read_flat(src, pos);
        self.fc_out.read_flat(src, pos);
    }
}

/// High-accuracy branch: fc_out ∘ core ∘ fc_in, where fc_in lifts each
/// scalar reading to the core's input width so the core sees an N-step
/// sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentBranch<T> {
    pub fc_in: Dense<T>, // 1 -> core input width, applied per timestep
    pub core: Core<T>,
    pub fc_out: Dense<T>, // core output width -> 1
}

impl<T: Scalar> ComponentBranch<T> {
    pub fn forward_cached(&self, window: &[T]) -> (T, ComponentCache<T>) {
        let seq = self.lift_sequence(window);
        let (features, core_cache) = match &self.core {
            Core::Lstm(p) => {
                let (h, c) = p.forward(&seq);
                (h, CoreCache::Lstm(c))
            }
            Core::Gru(p) => {
                let (h, c) = p.forward(&seq);
                (h, CoreCache::Gru(c))
            }
            Core::Attention(p) => {
                let (h, c) = p.forward(&seq);
                (h, CoreCache::Attention(c))
            }
        };
        let pred = self.fc_out.forward(&features)[0];
        (
            pred,
            ComponentCache {
                seq,
                core: core_cache,
                features,
            },
        )
    }

    /// Accumulates parameter grads for a scalar output gradient.
    pub fn backward(
        &self,
        window: &[T],
        cache: &ComponentCache<T>,
        grad_out: T,
        grads: &mut ComponentGrads<T>,
    ) {
        let d_features = self
            .fc_out
            .backward(&cache.features, &[grad_out], &mut grads.fc_out);
        let dxs = match (&self.core, &cache.core, &mut grads.core) {
            (Core::Lstm(p), CoreCache::Lstm(c), CoreGrads::Lstm(g)) => {
                p.backward(c, &d_features, g)
            }
            (Core::Gru(p), CoreCache::Gru(c), CoreGrads::Gru(g)) => {
                p.backward(c, &d_features, g)
            }
            (Core::Attention(p), CoreCache::Attention(c), CoreGrads::Attention(g)) => {
                p.backward(c, &d_features, g)
            }
            _ => unreachable!("core/cache/grads kind mismatch"),
        };
        for (t, dx) in dxs.iter().enumerate() {
            self.fc_in.backward(&[window[t]], dx, &mut grads.fc_in);
        }
    }

    pub fn grads_like(&self) -> ComponentGrads<T> {
        let core = match &self.core {
            Core::Lstm(p) => CoreGrads::Lstm(LstmParams::zeros(p.hidden_size, p.input_size)),
            Core::Gru(p) => CoreGrads::Gru(GruParams::zeros(p.hidden_size, p.input_size)),
            Core::Attention(p) => {
                CoreGrads::Attention(crate::nn::attention::AttentionGrads::zeros_like(p))
            }
        };
        ComponentGrads {
            fc_in: self.fc_in.grads_like(),
            core,
            fc_out: self.fc_out.grads_like(),
        }
    }
    pub fn lift_sequence(&self, window: &[T]) -> Vec<Vec<T>> {
        window.iter().map(|x| self.fc_in.forward(&[*x])).collect()
    }

    pub fn forward(&self, window: &[T]) -> T {
        let seq = self.lift_sequence(window);
        let features = self.core.forward(&seq);
        self.fc_out.forward(&features)[0]
    }

    /// Core features for a window (used by the fine-tuning phase, which
    /// trains only fc_out on cached features).
    pub fn features(&self, window: &[T]) -> Vec<T> {
        let seq = self.lift_sequence(window);
        self.core.forward(&seq)
    }

    pub fn mac_count(&self, seq_len: usize) -> u64 {
        self.fc_in.mac_count() * seq_len as u64
            + self.core.mac_count(seq_len)
            + self.fc_out.mac_count()
    }
}

impl<T: Scalar> FlatParams<T> for ComponentBranch<T> {
    fn param_count(&self) -> usize {
        self.fc_in.param_count() + self.core.param_count() + self.fc_out.param_count()
    }
    fn write_flat(&self, out: &mut Vec<T>) {
        self.fc_in.write_flat(out);
        self.core.write_flat(out);
        self.fc_out.write_flat(out);
    }
    fn read_flat(&mut self, src: &[T], pos: &mut usize) {
        self.fc_in.read_flat(src, pos);
        self.core.read_flat(src, pos);
        self.fc_out.read_flat(src, pos);
    }
}

/// Layer widths for a freshly initialized model.
#[derive(Debug, Clone)]
pub struct ModelDims {
    pub window_n: usize,
    pub h_lin: usize,
    pub core_in: usize,
    pub core_hidden: usize,
    pub attn_model: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            window_n: 20,
            h_lin: 8,
            core_in: 4,
            core_hidden: 16,
            attn_model: 8,
        }
    }
}

/// Which branch served an inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Linear,
    Component,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Linear => "linear",
            Branch::Component => "component",
        })
    }
}

/// Routing outcome for one window. `gate_value` is the effective gate
/// output (possibly reused from an earlier window under gate skipping);
/// `gate_evaluated` is false when it was reused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutingDecision {
    pub gate_value: f64,
    pub branch: Branch,
    pub gate_evaluated: bool,
}

/// Per-branch execution counters (relaxed atomics; shareable across threads).
#[derive(Debug, Default)]
pub struct ExecCounters {
    gate: AtomicU64,
    linear: AtomicU64,
    component: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecCounts {
    pub gate: u64,
    pub linear: u64,
    pub component: u64,
}

impl ExecCounters {
    fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::Relaxed);
    }
    fn snapshot(&self) -> ExecCounts {
        ExecCounts {
            gate: self.gate.load(Ordering::Relaxed),
            linear: self.linear.load(Ordering::Relaxed),
            component: self.component.load(Ordering::Relaxed),
        }
    }
    fn reset(&self) {
        self.gate.store(0, Ordering::Relaxed);
        self.linear.store(0, Ordering::Relaxed);
        self.component.store(0, Ordering::Relaxed);
    }
}

/// The full routed calibration model.
#[derive(Debug)]
pub struct SendalModel<T> {
    pub embedding: EmbeddingLayer<T>,
    pub linear: LinearBranch<T>,
    pub component: ComponentBranch<T>,
    pub window_n: usize,
    /// Routing threshold; the component branch runs iff gate > theta.
    pub theta: f64,
    /// Default gate re-evaluation period for stream inference.
    pub skip_period: usize,
    counters: ExecCounters,
}

impl<T> Clone for SendalModel<T>
where
    T: Scalar,
{
    fn clone(&self) -> Self {
        SendalModel {
            embedding: self.embedding.clone(),
            linear: self.linear.clone(),
            component: self.component.clone(),
            window_n: self.window_n,
            theta: self.theta,
            skip_period: self.skip_period,
            counters: ExecCounters::default(),
        }
    }
}

impl<T: Scalar> SendalModel<T> {
    pub fn from_parts(
        embedding: EmbeddingLayer<T>,
        linear: LinearBranch<T>,
        component: ComponentBranch<T>,
        window_n: usize,
        theta: f64,
        skip_period: usize,
    ) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::invalid("theta must lie in (0, 1)"));
        }
        if skip_period == 0 {
            return Err(Error::invalid("skip period must be >= 1"));
        }
        if embedding.linear.in_dim() != window_n
            || linear.fc_in.in_dim() != window_n
            || component.fc_in.in_dim() != 1
        {
            return Err(Error::invalid("layer dimensions do not match window size"));
        }
        Ok(SendalModel {
            embedding,
            linear,
            component,
            window_n,
            theta,
            skip_period,
            counters: ExecCounters::default(),
        })
    }

    /// Fresh model with fan-in uniform initialization, seeded.
    pub fn init(
        core_kind: CoreKind,
        dims: &ModelDims,
        theta: f64,
        skip_period: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = dims.window_n;
        let embedding = EmbeddingLayer {
            linear: Dense::init(1, n, &mut rng),
        };
        let linear = LinearBranch {
            fc_in: Dense::init(dims.h_lin, n, &mut rng),
            fc_out: Dense::init(1, dims.h_lin, &mut rng),
        };
        let (core, core_in) = match core_kind {
            CoreKind::Lstm => (
                Core::Lstm(LstmParams::init(dims.core_hidden, dims.core_in, &mut rng)),
                dims.core_in,
            ),
            CoreKind::Gru => (
                Core::Gru(GruParams::init(dims.core_hidden, dims.core_in, &mut rng)),
                dims.core_in,
            ),
            CoreKind::Attention => (
                Core::Attention(AttentionParams::init(n, dims.attn_model, &mut rng)),
                dims.attn_model,
            ),
        };
        let core_out = core.output_size();
        let component = ComponentBranch {
            fc_in: Dense::init(core_in, 1, &mut rng),
            core,
            fc_out: Dense::init(1, core_out, &mut rng),
        };
        Self::from_parts(embedding, linear, component, n, theta, skip_period)
    }

    pub fn core_kind(&self) -> CoreKind {
        self.component.core.kind()
    }

    fn check_window(&self, window: &[T]) -> Result<()> {
        if window.len() != self.window_n {
            return Err(Error::invalid(format!(
                "window length {} does not match model window size {}",
                window.len(),
                self.window_n
            )));
        }
        Ok(())
    }

    /// Gate output in (0,1) for one window.
    pub fn gate(&self, window: &[T]) -> Result<T> {
        self.check_window(window)?;
        ExecCounters::bump(&self.counters.gate);
        Ok(self.embedding.gate_value(window))
    }

    /// Linear branch only; no gate evaluation.
    pub fn infer_linear(&self, window: &[T]) -> Result<T> {
        self.check_window(window)?;
        ExecCounters::bump(&self.counters.linear);
        Ok(self.linear.forward(window))
    }

    /// Component branch only; no gate evaluation.
    pub fn infer_component(&self, window: &[T]) -> Result<T> {
        self.check_window(window)?;
        ExecCounters::bump(&self.counters.component);
        Ok(self.component.forward(window))
    }

    /// Gate decides, then exactly one branch runs. Values are bit-identical
    /// to invoking the selected branch directly.
    pub fn top_down_infer(&self, window: &[T]) -> Result<(T, RoutingDecision)> {
        let gate = self.gate(window)?;
        let decision = RoutingDecision {
            gate_value: gate.as_f64(),
            branch: if gate.as_f64() > self.theta {
                Branch::Component
            } else {
                Branch::Linear
            },
            gate_evaluated: true,
        };
        let value = match decision.branch {
            Branch::Linear => self.infer_linear(window)?,
            Branch::Component => self.infer_component(window)?,
        };
        Ok((value, decision))
    }

    /// Stream inference with gate skipping: the gate is evaluated on
    /// windows at stream positions 0, p, 2p, ...; positions in between reuse
    /// the last evaluated gate's branch choice. p = 1 reduces exactly to
    /// per-window top-down inference.
    pub fn infer_stream<'a, I>(&self, windows: I, skip_period: usize) -> Result<Vec<(T, RoutingDecision)>>
    where
        I: IntoIterator<Item = &'a [T]>,
        T: 'a,
    {
        if skip_period == 0 {
            return Err(Error::invalid("skip period must be >= 1"));
        }
        let mut out = Vec::new();
        let mut last: Option<RoutingDecision> = None;
        for (pos, window) in windows.into_iter().enumerate() {
            let decision = if pos % skip_period == 0 || last.is_none() {
                let gate = self.gate(window)?;
                RoutingDecision {
                    gate_value: gate.as_f64(),
                    branch: if gate.as_f64() > self.theta {
                        Branch::Component
                    } else {
                        Branch::Linear
                    },
                    gate_evaluated: true,
                }
            } else {
                RoutingDecision {
                    gate_evaluated: false,
                    ..last.unwrap()
                }
            };
            let value = match decision.branch {
                Branch::Linear => self.infer_linear(window)?,
                Branch::Component => self.infer_component(window)?,
            };
            last = Some(decision);
            out.push((value, decision));
        }
        Ok(out)
    }

    /// Exact multiply-accumulate count of the operations this decision
    /// executed (weight-matrix MACs only; independent of input values).
    pub fn count_macs(&self, decision: &RoutingDecision) -> u64 {
        let gate = if decision.gate_evaluated {
            self.gate_macs()
        } else {
            0
        };
        gate + match decision.branch {
            Branch::Linear => self.linear_macs(),
            Branch::Component => self.component_macs(),
        }
    }

    pub fn gate_macs(&self) -> u64 {
        self.embedding.linear.mac_count()
    }

    pub fn linear_macs(&self) -> u64 {
        self.linear.mac_count()
    }

    pub fn component_macs(&self) -> u64 {
        self.component.mac_count(self.window_n)
    }

    pub fn exec_counts(&self) -> ExecCounts {
        self.counters.snapshot()
    }

    pub fn reset_exec_counts(&self) {
        self.counters.reset();
    }

    /// Convert every parameter to another precision (used to run the
    /// latency benchmark at 32-bit from a 64-bit trained model).
    pub fn cast<U: Scalar>(&self) -> SendalModel<U> {
        let conv_dense = |d: &Dense<T>| -> Dense<U> {
            Dense {
                weight: crate::nn::matrix::Matrix::from_vec(
                    d.weight.rows,
                    d.weight.cols,
                    d.weight.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                ),
                bias: d.bias.iter().map(|v| U::from_f64(v.as_f64())).collect(),
            }
        };
        let conv_mat = |m: &crate::nn::matrix::Matrix<T>| {
            crate::nn::matrix::Matrix::from_vec(
                m.rows,
                m.cols,
                m.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
            )
        };
        let conv_gate = |g: &crate::nn::lstm::RecurrentGate<T>| crate::nn::lstm::RecurrentGate {
            w: conv_mat(&g.w),
            u: conv_mat(&g.u),
            b: g.b.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        };
        let core = match &self.component.core {
            Core::Lstm(p) => Core::Lstm(LstmParams {
                input_size: p.input_size,
                hidden_size: p.hidden_size,
                input_gate: conv_gate(&p.input_gate),
                forget_gate: conv_gate(&p.forget_gate),
                cell_gate: conv_gate(&p.cell_gate),
                output_gate: conv_gate(&p.output_gate),
            }),
            Core::Gru(p) => Core::Gru(GruParams {
                input_size: p.input_size,
                hidden_size: p.hidden_size,
                reset_gate: conv_gate(&p.reset_gate),
                update_gate: conv_gate(&p.update_gate),
                candidate: conv_gate(&p.candidate),
            }),
            Core::Attention(p) => Core::Attention(AttentionParams {
                model_size: p.model_size,
                wq: conv_mat(&p.wq),
                wk: conv_mat(&p.wk),
                wv: conv_mat(&p.wv),
                wo: conv_mat(&p.wo),
                positional: conv_mat(&p.positional),
            }),
        };
        SendalModel {
            embedding: EmbeddingLayer {
                linear: conv_dense(&self.embedding.linear),
            },
            linear: LinearBranch {
                fc_in: conv_dense(&self.linear.fc_in),
                fc_out: conv_dense(&self.linear.fc_out),
            },
            component: ComponentBranch {
                fc_in: conv_dense(&self.component.fc_in),
                core,
                fc_out: conv_dense(&self.component.fc_out),
            },
            window_n: self.window_n,
            theta: self.theta,
            skip_period: self.skip_period,
            counters: ExecCounters::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::dense::Dense;

    fn model(kind: CoreKind, seed: u64) -> SendalModel<f64> {
        SendalModel::init(kind, &ModelDims::default(), 0.5, 1, seed).unwrap()
    }

    fn window(seed: u64, n: usize) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..3.0)).collect()
    }

    #[test]
    fn zero_embedding_gates_at_half() {
        let mut m = model(CoreKind::Lstm, 1);
        m.embedding.linear = Dense::zeros(1, 20);
        let w = window(5, 20);
        assert_eq!(m.gate(&w).unwrap(), 0.5);
    }

    #[test]
    fn gate_is_monotone_in_bias() {
        let m = model(CoreKind::Lstm, 2);
        let w = window(6, 20);
        let g0 = m.gate(&w).unwrap();
        let mut raised = m.clone();
        raised.embedding.linear.bias[0] += 1.0;
        assert!(raised.gate(&w).unwrap() > g0);
    }

    #[test]
    fn gate_composes_dense_and_sigmoid() {
        let m = model(CoreKind::Gru, 3);
        let w = window(7, 20);
        let direct = m.gate(&w).unwrap();
        let composed = sigmoid(m.embedding.linear.forward(&w)[0]);
        assert_eq!(direct, composed);
    }

    #[test]
    fn component_with_zero_core_outputs_fc_out_bias() {
        let mut m = model(CoreKind::Lstm, 4);
        m.component.core = Core::Lstm(LstmParams::zeros(16, 4));
        m.component.fc_out = Dense::zeros(1, 16);
        m.component.fc_out.bias[0] = 0.77;
        let w = window(8, 20);
        assert_eq!(m.infer_component(&w).unwrap(), 0.77);
    }

    #[test]
    fn branches_are_deterministic() {
        let m = model(CoreKind::Attention, 5);
        let w = window(9, 20);
        assert_eq!(m.infer_linear(&w).unwrap(), m.infer_linear(&w).unwrap());
        assert_eq!(
            m.infer_component(&w).unwrap(),
            m.infer_component(&w).unwrap()
        );
    }

    #[test]
    fn routing_follows_gate_with_strict_threshold() {
        // Force a known gate by zeroing weights and setting the bias.
        let mut m = model(CoreKind::Lstm, 6);
        m.embedding.linear = Dense::zeros(1, 20);
        m.embedding.linear.bias[0] = (0.7f64 / 0.3).ln(); // sigmoid -> 0.7
        let w = window(10, 20);
        let (value, decision) = m.top_down_infer(&w).unwrap();
        assert_eq!(decision.branch, Branch::Component);
        assert!(decision.gate_value > 0.69 && decision.gate_value < 0.71);
        assert_eq!(value, m.infer_component(&w).unwrap());

        // Gate exactly at theta routes linear (strict inequality).
        m.embedding.linear.bias[0] = 0.0; // sigmoid(0) = 0.5 exactly
        let (value, decision) = m.top_down_infer(&w).unwrap();
        assert_eq!(decision.gate_value, 0.5);
        assert_eq!(decision.branch, Branch::Linear);
        assert_eq!(value, m.infer_linear(&w).unwrap());
    }

    #[test]
    fn unselected_branch_never_runs() {
        let mut m = model(CoreKind::Gru, 7);
        m.embedding.linear = Dense::zeros(1, 20); // gate 0.5 -> always linear
        let w = window(11, 20);
        m.reset_exec_counts();
        for _ in 0..10 {
            m.top_down_infer(&w).unwrap();
        }
        let counts = m.exec_counts();
        assert_eq!(counts.gate, 10);
        assert_eq!(counts.linear, 10);
        assert_eq!(counts.component, 0);
    }

    #[test]
    fn stream_with_period_one_equals_per_window_inference() {
        let m = model(CoreKind::Lstm, 8);
        let windows: Vec<Vec<f64>> = (0..12).map(|i| window(100 + i, 20)).collect();
        let slices: Vec<&[f64]> = windows.iter().map(|w| w.as_slice()).collect();
        let stream = m.infer_stream(slices.iter().copied(), 1).unwrap();
        for (w, (v, d)) in slices.iter().zip(stream.iter()) {
            let (v2, d2) = m.top_down_infer(w).unwrap();
            assert_eq!(*v, v2);
            assert_eq!(d, &d2);
        }
    }

    #[test]
    fn stream_skip_period_evaluates_gate_on_schedule() {
        let m = model(CoreKind::Lstm, 9);
        let windows: Vec<Vec<f64>> = (0..8).map(|i| window(200 + i, 20)).collect();
        let slices: Vec<&[f64]> = windows.iter().map(|w| w.as_slice()).collect();
        m.reset_exec_counts();
        let stream = m.infer_stream(slices.iter().copied(), 4).unwrap();
        let evaluated: Vec<usize> = stream
            .iter()
            .enumerate()
            .filter(|(_, (_, d))| d.gate_evaluated)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(evaluated, vec![0, 4]);
        assert_eq!(m.exec_counts().gate, 2);
    }

    #[test]
    fn constant_gate_makes_skipping_vacuous() {
        let mut m = model(CoreKind::Lstm, 10);
        m.embedding.linear = Dense::zeros(1, 20);
        m.embedding.linear.bias[0] = 2.0; // constant gate > theta
        let windows: Vec<Vec<f64>> = (0..9).map(|i| window(300 + i, 20)).collect();
        let slices: Vec<&[f64]> = windows.iter().map(|w| w.as_slice()).collect();
        for p in [1usize, 2, 3, 5] {
            let stream = m.infer_stream(slices.iter().copied(), p).unwrap();
            assert!(stream.iter().all(|(_, d)| d.branch == Branch::Component));
        }
    }

    #[test]
    fn linear_route_mac_count_matches_dimension_arithmetic() {
        let m = model(CoreKind::Lstm, 11);
        let decision = RoutingDecision {
            gate_value: 0.2,
            branch: Branch::Linear,
            gate_evaluated: true,
        };
        // gate 20 + fc_in 20*8 + fc_out 8 = 188
        assert_eq!(m.count_macs(&decision), 188);
        let reused = RoutingDecision {
            gate_evaluated: false,
            ..decision
        };
        assert_eq!(m.count_macs(&reused), 168);
    }

    #[test]
    fn component_route_costs_more_than_linear_for_all_cores() {
        for kind in [CoreKind::Lstm, CoreKind::Gru, CoreKind::Attention] {
            let m = model(kind, 12);
            assert!(
                m.component_macs() > m.linear_macs(),
                "{kind}: component {} vs linear {}",
                m.component_macs(),
                m.linear_macs()
            );
        }
    }

    #[test]
    fn cast_to_f32_preserves_structure() {
        let m = model(CoreKind::Lstm, 13);
        let m32: SendalModel<f32> = m.cast();
        let w64 = window(400, 20);
        let w32: Vec<f32> = w64.iter().map(|v| *v as f32).collect();
        let a = m.infer_component(&w64).unwrap();
        let b = m32.infer_component(&w32).unwrap() as f64;
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}
