use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::rng::SplitMix64;

use super::jet::Jet2;

/// How many input derivatives to propagate through the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DerivOrder {
    Value,
    First,
    Second,
}

impl DerivOrder {
    /// Number of jet components carried: value, ∂x, ∂y, ∂xx, ∂xy, ∂yy.
    pub const fn components(self) -> usize {
        match self {
            DerivOrder::Value => 1,
            DerivOrder::First => 3,
            DerivOrder::Second => 6,
        }
    }
}

/// Fully-connected network R² → R with tanh hidden layers and a linear output.
///
/// Parameters live in one flat vector; layer `l` stores its weight matrix
/// (`outputs × inputs`, row-major) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

pub fn validate_layer_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::config_key(
            "layers",
            "need at least an input and an output layer",
        ));
    }
    if layer_sizes[0] != 2 {
        return Err(Error::config_key("layers", "input dimension must be 2"));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(Error::config_key("layers", "output dimension must be 1"));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::config_key("layers", "layer sizes must be positive"));
    }
    Ok(())
}

pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl DenseNet {
    /// Uniform weights on `[-1/√fan_in, 1/√fan_in]`, zero biases.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        validate_layer_sizes(layer_sizes)?;
        let mut rng = SplitMix64::new(seed);
        let mut params = Vec::with_capacity(param_count(layer_sizes));
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.uniform(-scale, scale)));
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params,
        })
    }

    pub fn from_params(layer_sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        validate_layer_sizes(layer_sizes)?;
        let expected = param_count(layer_sizes);
        if params.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Offset of layer `l`'s weights in the flat parameter vector.
    fn layer_offset(&self, l: usize) -> usize {
        param_count(&self.layer_sizes[..=l])
    }

    pub fn layer(&self, l: usize) -> LayerView<'_> {
        let (inputs, outputs) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        let off = self.layer_offset(l);
        LayerView {
            inputs,
            outputs,
            weights: &self.params[off..off + inputs * outputs],
            bias: &self.params[off + inputs * outputs..off + inputs * outputs + outputs],
        }
    }

    /// Mutable access to the output layer's bias.
    pub fn output_bias_mut(&mut self) -> &mut f64 {
        self.params.last_mut().expect("network has parameters")
    }

    /// Sum of squares of every parameter.
    pub fn param_sq_norm(&self) -> f64 {
        self.params.iter().map(|p| p * p).sum()
    }

    pub fn eval(&self, x: Point2) -> f64 {
        Tape::forward(self, &[x], DerivOrder::Value).jet(0).value
    }

    /// Value, input gradient and input Hessian at `x`.
    pub fn eval_jet(&self, x: Point2) -> Jet2 {
        Tape::forward(self, &[x], DerivOrder::Second).jet(0)
    }

    /// Jets at every point. Components beyond `order` are zero.
    pub fn jets(&self, points: &[Point2], order: DerivOrder) -> Result<Vec<Jet2>> {
        check_points(points)?;
        let mut out = Vec::with_capacity(points.len());
        for (b, block) in points.chunks(BLOCK).enumerate() {
            let tape = Tape::forward(self, block, order);
            out.extend((0..block.len()).map(|p| tape.jet(p)));
            check_outputs(&out[b * BLOCK..])
                .map_err(|e| offset_index(e, b * BLOCK))?;
        }
        Ok(out)
    }

    /// Accumulates into `grad` the parameter gradient of `Σᵢ ⟨adjointᵢ, jetᵢ⟩`,
    /// where `jetᵢ` is the jet of the network at `points[i]` truncated to `order`.
    pub fn backprop(
        &self,
        points: &[Point2],
        order: DerivOrder,
        adjoints: &[Jet2],
        grad: &mut ParamGradient,
    ) -> Result<()> {
        check_points(points)?;
        let recorded = Recorded {
            net: self,
            tapes: points
                .chunks(BLOCK)
                .map(|block| Tape::forward(self, block, order))
                .collect(),
            len: points.len(),
        };
        recorded.backprop(adjoints, grad)
    }

    /// Forward pass that keeps its tape, so the jets can be turned into an
    /// objective and backpropagated without evaluating the network again.
    pub fn record(&self, points: &[Point2], order: DerivOrder) -> Result<Recorded<'_>> {
        check_points(points)?;
        let tapes: Vec<Tape> = points
            .chunks(BLOCK)
            .map(|block| Tape::forward(self, block, order))
            .collect();
        let recorded = Recorded {
            net: self,
            tapes,
            len: points.len(),
        };
        check_outputs(&recorded.jets())?;
        Ok(recorded)
    }
}

/// Network jets at a point set together with the forward tape behind them.
pub struct Recorded<'a> {
    net: &'a DenseNet,
    tapes: Vec<Tape>,
    len: usize,
}

impl Recorded<'_> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn jets(&self) -> Vec<Jet2> {
        self.tapes
            .iter()
            .flat_map(|t| (0..t.n).map(move |p| t.jet(p)))
            .collect()
    }

    /// Same contract as [`DenseNet::backprop`] on the recorded points.
    pub fn backprop(&self, adjoints: &[Jet2], grad: &mut ParamGradient) -> Result<()> {
        if self.len != adjoints.len() {
            return Err(Error::Shape(format!(
                "{} points but {} adjoints",
                self.len,
                adjoints.len()
            )));
        }
        if grad.layer_sizes != self.net.layer_sizes {
            return Err(Error::Shape("gradient does not match network".into()));
        }
        if let Some(index) = adjoints.iter().position(|a| !a.is_finite()) {
            return Err(Error::NumericalOverflow {
                index,
                what: "non-finite loss adjoint".into(),
            });
        }
        for (tape, adj) in self.tapes.iter().zip(adjoints.chunks(BLOCK)) {
            tape.backward(self.net, adj, &mut grad.values);
        }
        if let Some(i) = grad.values.iter().position(|g| !g.is_finite()) {
            return Err(Error::NumericalOverflow {
                index: i,
                what: "non-finite parameter gradient".into(),
            });
        }
        Ok(())
    }
}

fn check_points(points: &[Point2]) -> Result<()> {
    match points.iter().position(|p| !p.is_finite()) {
        Some(index) => Err(Error::NumericalOverflow {
            index,
            what: "non-finite input point".into(),
        }),
        None => Ok(()),
    }
}

fn check_outputs(jets: &[Jet2]) -> Result<()> {
    match jets.iter().position(|j| !j.is_finite()) {
        Some(index) => Err(Error::NumericalOverflow {
            index,
            what: "non-finite network output".into(),
        }),
        None => Ok(()),
    }
}

fn offset_index(e: Error, offset: usize) -> Error {
    match e {
        Error::NumericalOverflow { index, what } => Error::NumericalOverflow {
            index: index + offset,
            what,
        },
        other => other,
    }
}

/// Gradient of a scalar objective with respect to every network parameter,
/// laid out exactly like [`DenseNet::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    layer_sizes: Vec<usize>,
    values: Vec<f64>,
}

impl ParamGradient {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layer_sizes: net.layer_sizes.clone(),
            values: vec![0.0; net.num_params()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, c: f64, other: &ParamGradient) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    /// `self += c · params` (gradient of `c/2 · ‖w‖²`).
    pub fn add_scaled_params(&mut self, c: f64, net: &DenseNet) {
        for (a, b) in self.values.iter_mut().zip(net.params()) {
            *a += c * b;
        }
    }
}

/// Loss and exact parameter gradient of a scalar objective of the network's
/// jets over `points`.
///
/// `objective` receives the jets (truncated to `order`) and returns the loss
/// together with `∂loss/∂jetᵢ` for every point.
pub fn param_gradient<F>(
    net: &DenseNet,
    points: &[Point2],
    order: DerivOrder,
    objective: F,
) -> Result<(f64, ParamGradient)>
where
    F: FnOnce(&[Jet2]) -> Result<(f64, Vec<Jet2>)>,
{
    let recorded = net.record(points, order)?;
    let (loss, adjoints) = objective(&recorded.jets())?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("objective value".into()));
    }
    let mut grad = ParamGradient::zeros_like(net);
    recorded.backprop(&adjoints, &mut grad)?;
    Ok((loss, grad))
}

/// Points per forward/backward block; bounds tape memory for large sets.
const BLOCK: usize = 1024;

/// Forward buffers for a block of points, kept for the reverse sweep.
///
/// Buffers are laid out `[component][unit][point]` so the inner loops run
/// over contiguous points: component `c` of unit `i` at point `p` in a layer
/// of width `w` sits at `(c * w + i) * n + p`.
struct Tape {
    comps: usize,
    n: usize,
    /// `acts[0]` holds the input jets; `acts[l + 1]` is layer `l`'s output.
    acts: Vec<Vec<f64>>,
    /// Pre-activation jets per layer.
    pres: Vec<Vec<f64>>,
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

impl Tape {
    fn forward(net: &DenseNet, points: &[Point2], order: DerivOrder) -> Self {
        let comps = order.components();
        let n = points.len();
        let sizes = &net.layer_sizes;
        let mut input = vec![0.0; comps * 2 * n];
        for (p, x) in points.iter().enumerate() {
            input[p] = x.x;
            input[n + p] = x.y;
            if comps > 1 {
                input[2 * n + p] = 1.0; // ∂x of the x input
                input[5 * n + p] = 1.0; // ∂y of the y input
            }
        }
        let mut acts = Vec::with_capacity(sizes.len());
        let mut pres = Vec::with_capacity(sizes.len() - 1);
        acts.push(input);
        let last = net.num_layers() - 1;
        for l in 0..=last {
            let layer = net.layer(l);
            let (n_in, n_out) = (layer.inputs, layer.outputs);
            let a_in = &acts[l];
            let mut pre = vec![0.0; comps * n_out * n];
            for c in 0..comps {
                for i in 0..n_out {
                    let dst = &mut pre[(c * n_out + i) * n..(c * n_out + i + 1) * n];
                    if c == 0 {
                        dst.fill(layer.bias[i]);
                    }
                    for k in 0..n_in {
                        let src = &a_in[(c * n_in + k) * n..(c * n_in + k + 1) * n];
                        axpy(layer.weights[i * n_in + k], src, dst);
                    }
                }
            }
            let out = if l == last {
                pre.clone()
            } else {
                let mut out = vec![0.0; comps * n_out * n];
                let m = n_out * n;
                for q in 0..m {
                    let t = pre[q].tanh();
                    let s = 1.0 - t * t;
                    out[q] = t;
                    if comps > 1 {
                        let (zx, zy) = (pre[m + q], pre[2 * m + q]);
                        out[m + q] = s * zx;
                        out[2 * m + q] = s * zy;
                        if comps > 3 {
                            let s2 = -2.0 * t * s;
                            out[3 * m + q] = s2 * zx * zx + s * pre[3 * m + q];
                            out[4 * m + q] = s2 * zx * zy + s * pre[4 * m + q];
                            out[5 * m + q] = s2 * zy * zy + s * pre[5 * m + q];
                        }
                    }
                }
                out
            };
            pres.push(pre);
            acts.push(out);
        }
        Self { comps, n, acts, pres }
    }

    fn jet(&self, p: usize) -> Jet2 {
        let out = &self.acts[self.acts.len() - 1];
        let n = self.n;
        let mut jet = Jet2::constant(out[p]);
        if self.comps > 1 {
            jet.grad = [out[n + p], out[2 * n + p]];
        }
        if self.comps > 3 {
            jet.hess = [out[3 * n + p], out[4 * n + p], out[5 * n + p]];
        }
        jet
    }

    /// Reverse sweep; adds `∂(Σₚ ⟨adjₚ, jetₚ⟩)/∂w` to `grad`.
    fn backward(&self, net: &DenseNet, adjoints: &[Jet2], grad: &mut [f64]) {
        let (comps, n) = (self.comps, self.n);
        let mut ao = vec![0.0; comps * n];
        for (p, a) in adjoints.iter().enumerate() {
            let seed = [a.value, a.grad[0], a.grad[1], a.hess[0], a.hess[1], a.hess[2]];
            for c in 0..comps {
                ao[c * n + p] = seed[c];
            }
        }
        let last = net.num_layers() - 1;
        for l in (0..=last).rev() {
            let layer = net.layer(l);
            let (n_in, n_out) = (layer.inputs, layer.outputs);
            let pre = &self.pres[l];
            let ap = if l == last {
                ao
            } else {
                let a_out = &self.acts[l + 1];
                let m = n_out * n;
                let mut ap = vec![0.0; comps * m];
                for q in 0..m {
                    let t = a_out[q];
                    let s = 1.0 - t * t;
                    let s2 = -2.0 * t * s;
                    ap[q] = ao[q] * s;
                    if comps > 1 {
                        let (zx, zy) = (pre[m + q], pre[2 * m + q]);
                        let (gx, gy) = (ao[m + q], ao[2 * m + q]);
                        ap[q] += s2 * (gx * zx + gy * zy);
                        ap[m + q] = gx * s;
                        ap[2 * m + q] = gy * s;
                        if comps > 3 {
                            let s3 = -2.0 * (s * s + t * s2);
                            let (hxx, hxy, hyy) = (ao[3 * m + q], ao[4 * m + q], ao[5 * m + q]);
                            let (zxx, zxy, zyy) = (pre[3 * m + q], pre[4 * m + q], pre[5 * m + q]);
                            ap[q] += s3 * (hxx * zx * zx + hxy * zx * zy + hyy * zy * zy)
                                + s2 * (hxx * zxx + hxy * zxy + hyy * zyy);
                            ap[m + q] += s2 * (2.0 * hxx * zx + hxy * zy);
                            ap[2 * m + q] += s2 * (2.0 * hyy * zy + hxy * zx);
                            ap[3 * m + q] = hxx * s;
                            ap[4 * m + q] = hxy * s;
                            ap[5 * m + q] = hyy * s;
                        }
                    }
                }
                ap
            };

            let off = net.layer_offset(l);
            let a_in = &self.acts[l];
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for i in 0..n_out {
                gb[i] += ap[i * n..(i + 1) * n].iter().sum::<f64>();
                for c in 0..comps {
                    let a = &ap[(c * n_out + i) * n..(c * n_out + i + 1) * n];
                    for k in 0..n_in {
                        gw[i * n_in + k] += dot(a, &a_in[(c * n_in + k) * n..(c * n_in + k + 1) * n]);
                    }
                }
            }

            if l == 0 {
                break;
            }
            let mut next = vec![0.0; comps * n_in * n];
            for c in 0..comps {
                for i in 0..n_out {
                    let a = &ap[(c * n_out + i) * n..(c * n_out + i + 1) * n];
                    for k in 0..n_in {
                        let dst = &mut next[(c * n_in + k) * n..(c * n_in + k + 1) * n];
                        axpy(layer.weights[i * n_in + k], a, dst);
                    }
                }
            }
            ao = next;
        }
    }
}
