//! Adam, the step-decay learning-rate schedule, and the training loops.

use serde::{Deserialize, Serialize};

use crate::diffnet::{validate_layer_sizes, DenseNet, ParamGradient};
use crate::error::{Error, Result};
use crate::geometry::{sample_boundary, sample_interior, Domain, Point2};
use crate::loss::{
    forward_loss_prepared, inverse_loss_prepared, BoundaryTargets, ForwardInterior,
    InverseInterior, LossReport, LossWeights,
};
use crate::pde::{BoundaryData, ResidualSpec, ScalarField};
use crate::rng::{SplitMix64, Stream};

/// Abort when the batch loss exceeds its first value by this factor.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Fresh state with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(num_params: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "Adam state has {} entries, params {}, gradient {}",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient entry {i}")));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

pub fn adam_step(
    state: &mut AdamState,
    net: &mut DenseNet,
    grad: &ParamGradient,
    lr: f64,
) -> Result<()> {
    if grad.layer_sizes() != net.layer_sizes() {
        return Err(Error::Shape("gradient does not match network".into()));
    }
    state.update(net.params_mut(), grad.values(), lr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub layers: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub weights: LossWeights,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub seed: u64,
    /// Redraw the collocation sets at the start of every epoch.
    pub resample: bool,
}

impl Default for TrainConfig {
    /// Architecture, batching, schedule and weights of the phantom-1, n = 1
    /// experiment; the epoch budget is a local choice.
    fn default() -> Self {
        Self {
            layers: vec![2, 26, 26, 26, 10, 1],
            epochs: 2000,
            batch_size: 1000,
            lr0: 1e-3,
            decay_factor: 0.8,
            decay_every: 200,
            weights: LossWeights::forward_defaults(),
            n_interior: 45_000,
            n_boundary: 1200,
            seed: 0,
            resample: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        validate_layer_sizes(&self.layers)?;
        self.weights.validate()?;
        if self.batch_size == 0 {
            return Err(Error::config_key("batch_size", "must be at least 1"));
        }
        if self.n_boundary == 0 {
            return Err(Error::config_key("n_boundary", "must be at least 1"));
        }
        if self.batch_size > self.n_interior {
            return Err(Error::config_key(
                "batch_size",
                format!(
                    "batch size {} exceeds n_interior {}",
                    self.batch_size, self.n_interior
                ),
            ));
        }
        if self.weights.k > self.batch_size {
            return Err(Error::config_key(
                "k",
                format!(
                    "K = {} exceeds batch size {}",
                    self.weights.k, self.batch_size
                ),
            ));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::config_key("lr0", "must be positive"));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::config_key("decay_factor", "must lie in (0, 1]"));
        }
        if self.decay_every == 0 {
            return Err(Error::config_key("decay_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// `lr0 · decay_factor^⌊epoch / decay_every⌋`.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    let drops = (epoch / cfg.decay_every.max(1)) as i32;
    cfg.lr0 * cfg.decay_factor.powi(drops)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean over the epoch's mini-batches.
    pub report: LossReport,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: DenseNet,
    pub history: Vec<EpochRecord>,
    /// Shuffle-stream state after the last epoch.
    pub rng_state: u64,
}

/// Hook called after every epoch, e.g. to write checkpoints.
pub trait TrainObserver {
    fn on_epoch(&mut self, record: &EpochRecord, net: &DenseNet, rng_state: u64) -> Result<()>;
}

impl TrainObserver for () {
    fn on_epoch(&mut self, _: &EpochRecord, _: &DenseNet, _: u64) -> Result<()> {
        Ok(())
    }
}

/// Collocation sets for one epoch.
struct Collocation {
    interior: Vec<Point2>,
    boundary: crate::geometry::PointBatch,
}

fn draw_collocation(domain: &Domain, cfg: &TrainConfig, epoch: usize) -> Result<Collocation> {
    let base = if cfg.resample {
        cfg.seed
            .wrapping_add((epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    } else {
        cfg.seed
    };
    Ok(Collocation {
        interior: sample_interior(
            domain,
            cfg.n_interior,
            SplitMix64::derive_seed(base, Stream::Interior),
        )?
        .points,
        boundary: sample_boundary(
            domain,
            cfg.n_boundary,
            SplitMix64::derive_seed(base, Stream::Boundary),
        )?,
    })
}

/// Shared epoch/mini-batch loop. `prepare` builds per-epoch data from the
/// collocation sets; `step_loss` evaluates one mini-batch.
fn run_training<D>(
    cfg: &TrainConfig,
    domain: &Domain,
    mut net: DenseNet,
    observer: &mut dyn TrainObserver,
    prepare: impl Fn(&Collocation) -> Result<(D, BoundaryTargets)>,
    step_loss: impl Fn(&DenseNet, &D, &[usize], &BoundaryTargets) -> Result<(LossReport, ParamGradient)>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut shuffle = SplitMix64::for_stream(cfg.seed, Stream::Shuffle);
    let mut adam = AdamState::new(net.num_params());
    let mut history = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            net,
            history,
            rng_state: shuffle.state(),
        });
    }
    let mut data = prepare(&draw_collocation(domain, cfg, 0)?)?;
    let mut order: Vec<usize> = (0..cfg.n_interior).collect();
    let mut initial_total: Option<f64> = None;
    let log_every = (cfg.epochs / 20).max(1);

    for epoch in 0..cfg.epochs {
        if cfg.resample && epoch > 0 {
            data = prepare(&draw_collocation(domain, cfg, epoch)?)?;
        }
        let lr = lr_schedule(epoch, cfg);
        shuffle.shuffle(&mut order);
        let mut reports = Vec::with_capacity(cfg.n_interior / cfg.batch_size + 1);
        for batch in order.chunks(cfg.batch_size) {
            // A trailing partial batch too small for the top-K term is skipped.
            if batch.len() < cfg.weights.k {
                continue;
            }
            let (report, grad) = step_loss(&net, &data.0, batch, &data.1)?;
            if !report.total.is_finite() {
                return Err(Error::NonFinite(format!("loss at epoch {epoch}")));
            }
            let initial = *initial_total.get_or_insert(report.total);
            if report.total > DIVERGENCE_FACTOR * initial {
                return Err(Error::Diverged {
                    epoch,
                    total: report.total,
                    initial,
                });
            }
            adam.update(net.params_mut(), grad.values(), lr)?;
            reports.push(report);
        }
        let record = EpochRecord {
            epoch,
            lr,
            report: LossReport::mean(&reports),
        };
        if epoch % log_every == 0 || epoch + 1 == cfg.epochs {
            log::info!(
                "epoch {epoch}: total {:.4e} l2 {:.3e} topk {:.3e} boundary {:.3e} tv {:.3e} lr {lr:.2e}",
                record.report.total,
                record.report.l2_residual,
                record.report.topk_residual,
                record.report.boundary,
                record.report.tv,
            );
        }
        observer.on_epoch(&record, &net, shuffle.state())?;
        history.push(record);
    }
    Ok(TrainOutcome {
        net,
        history,
        rng_state: shuffle.state(),
    })
}

/// Trains a potential network on the unit disc.
pub fn train_forward(
    cfg: &TrainConfig,
    spec: &ResidualSpec,
    u0: &BoundaryData,
) -> Result<TrainOutcome> {
    train_forward_with(cfg, &Domain::UnitDisc, spec, u0, &mut ())
}

pub fn train_forward_with(
    cfg: &TrainConfig,
    domain: &Domain,
    spec: &ResidualSpec,
    u0: &BoundaryData,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let net = DenseNet::init(&cfg.layers, SplitMix64::derive_seed(cfg.seed, Stream::Init))?;
    run_training(
        cfg,
        domain,
        net,
        observer,
        |c| {
            spec.check_positive(&c.interior)?;
            Ok((
                ForwardInterior::prepare(spec, &c.interior)?,
                BoundaryTargets::prepare(&c.boundary, u0)?,
            ))
        },
        |net, data, batch, bnd| forward_loss_prepared(net, &data.select(batch), bnd, &cfg.weights),
    )
}

/// Trains a conductivity network against a fixed potential on the unit disc.
pub fn train_inverse(
    cfg: &TrainConfig,
    u: &dyn ScalarField,
    sigma0: &BoundaryData,
) -> Result<TrainOutcome> {
    train_inverse_with(cfg, &Domain::UnitDisc, u, sigma0, &mut ())
}

/// The conductivity network starts from the mean boundary conductivity
/// (output bias), so training begins at a physically admissible field.
pub fn train_inverse_with(
    cfg: &TrainConfig,
    domain: &Domain,
    u: &dyn ScalarField,
    sigma0: &BoundaryData,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if !u.has_hessian() {
        return Err(Error::UnsupportedBacking);
    }
    let mut net = DenseNet::init(&cfg.layers, SplitMix64::derive_seed(cfg.seed, Stream::Init))?;
    let first = draw_collocation(domain, cfg, 0)?;
    let targets = sigma0.values_on(&first.boundary)?;
    *net.output_bias_mut() = targets.iter().sum::<f64>() / targets.len() as f64;
    run_training(
        cfg,
        domain,
        net,
        observer,
        |c| {
            Ok((
                InverseInterior::prepare(u, &c.interior)?,
                BoundaryTargets::prepare(&c.boundary, sigma0)?,
            ))
        },
        |net, data, batch, bnd| inverse_loss_prepared(net, &data.select(batch), bnd, &cfg.weights),
    )
}
