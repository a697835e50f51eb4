//! Damped Gauss-Newton training for the inverse-kinematics network.
//!
//! Each step linearizes the network around the current weights on one
//! minibatch, accumulates the normal equations in fixed-size chunks, and
//! solves `(JtJ/m + lambda I) step = Jt r / m`. A step is kept only if it does
//! not increase the loss on the batch it was computed from; otherwise the
//! damping factor grows and the step is re-solved from the same normal
//! equations. Everything is sequential and seeded, so a given dataset,
//! configuration, and seed always produce bit-identical weights.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

use super::mlp::{Mlp, Standardizer, HIDDEN_DIM, INPUT_DIM, OUTPUT_DIM, PARAM_COUNT};
use super::IkSample;

/// Fewest samples accepted for training; below this the validation split
/// becomes meaningless.
pub const MIN_DATASET: usize = 100;

const CHUNK: usize = 256;
const W1_LEN: usize = HIDDEN_DIM * INPUT_DIM;
const B1_OFF: usize = W1_LEN;
const W2_OFF: usize = B1_OFF + HIDDEN_DIM;
const B2_OFF: usize = W2_OFF + OUTPUT_DIM * HIDDEN_DIM;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Upper bound on accepted steps.
    pub max_epochs: usize,
    /// Rows per minibatch; batches walk the training split round-robin.
    pub batch_size: usize,
    /// Initial damping factor.
    pub lambda0: f64,
    /// Damping ceiling; exceeding it stops training.
    pub lambda_max: f64,
    /// Stop once the scaled gradient norm falls below this.
    pub gradient_tol: f64,
    /// Fraction of the dataset held out for validation.
    pub validation_fraction: f64,
    /// Seed for weight initialization.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 200,
            batch_size: 10_000,
            lambda0: 1e-3,
            lambda_max: 1e10,
            gradient_tol: 1e-7,
            validation_fraction: 0.1,
            seed: 17,
        }
    }
}

/// Why the training loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    GradientConverged,
    DampingExhausted,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::MaxEpochs => "max-epochs",
            StopReason::GradientConverged => "gradient-converged",
            StopReason::DampingExhausted => "damping-exhausted",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Accepted steps (one per epoch that found a downhill step).
    pub epochs: usize,
    /// Batch loss after the last accepted step, in standardized units.
    pub final_loss: f64,
    /// Root-mean-square validation error per output, in physical units
    /// (radians for angles, dimensionless for axis components).
    pub validation_rmse: [f64; OUTPUT_DIM],
    pub wall_seconds: f64,
    pub stop: StopReason,
    /// Batch loss before and after each accepted step.
    pub step_losses: Vec<[f64; 2]>,
}

struct Split {
    train_x: Vec<[f64; INPUT_DIM]>,
    train_t: Vec<[f64; OUTPUT_DIM]>,
    val: Vec<IkSample>,
}

fn split_and_standardize(dataset: &[IkSample], fraction: f64) -> (Split, Standardizer, Standardizer) {
    let n = dataset.len();
    let val_len = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let train_len = n - val_len;
    let train = &dataset[..train_len];
    let input_norm = Standardizer::fit(INPUT_DIM, train.iter().map(|s| s.input.as_slice()));
    let output_norm = Standardizer::fit(OUTPUT_DIM, train.iter().map(|s| s.target.as_slice()));
    let mut train_x = Vec::with_capacity(train_len);
    let mut train_t = Vec::with_capacity(train_len);
    for s in train {
        let mut x = [0.0; INPUT_DIM];
        input_norm.apply(&s.input, &mut x);
        let mut t = [0.0; OUTPUT_DIM];
        output_norm.apply(&s.target, &mut t);
        train_x.push(x);
        train_t.push(t);
    }
    (
        Split {
            train_x,
            train_t,
            val: dataset[train_len..].to_vec(),
        },
        input_norm,
        output_norm,
    )
}

/// Contiguous index ranges covering one batch, wrapping around the end of the
/// training split.
fn batch_ranges(train_len: usize, batch: usize, epoch: usize) -> [(usize, usize); 2] {
    let start = (epoch * batch) % train_len;
    if start + batch <= train_len {
        [(start, batch), (0, 0)]
    } else {
        let head = train_len - start;
        [(start, head), (0, batch - head)]
    }
}

fn batch_loss(mlp: &Mlp, split: &Split, ranges: &[(usize, usize); 2]) -> f64 {
    let mut hidden = [0.0; HIDDEN_DIM];
    let mut out = [0.0; OUTPUT_DIM];
    let mut sum = 0.0;
    let mut rows = 0usize;
    for &(start, len) in ranges {
        for idx in start..start + len {
            mlp.forward_standardized(&split.train_x[idx], &mut hidden, &mut out);
            let t = &split.train_t[idx];
            for k in 0..OUTPUT_DIM {
                let r = out[k] - t[k];
                sum += r * r;
            }
            rows += 1;
        }
    }
    sum / (2.0 * (OUTPUT_DIM * rows) as f64)
}

/// Accumulates `JtJ`, `Jt r`, and the residual norm over the batch, chunking
/// the Jacobian so memory stays bounded regardless of batch size.
fn accumulate_normal_equations(
    mlp: &Mlp,
    split: &Split,
    ranges: &[(usize, usize); 2],
    jbuf: &mut DMatrix<f64>,
    rbuf: &mut DVector<f64>,
    a: &mut DMatrix<f64>,
    g: &mut DVector<f64>,
) -> (f64, usize) {
    a.fill(0.0);
    g.fill(0.0);
    let mut hidden = [0.0; HIDDEN_DIM];
    let mut out = [0.0; OUTPUT_DIM];
    let mut residual_sq = 0.0;
    let mut rows = 0usize;

    let mut indices = ranges
        .iter()
        .flat_map(|&(start, len)| start..start + len)
        .peekable();
    while indices.peek().is_some() {
        let mut c = 0usize;
        while c < CHUNK {
            let Some(idx) = indices.next() else { break };
            let x = &split.train_x[idx];
            let t = &split.train_t[idx];
            mlp.forward_standardized(x, &mut hidden, &mut out);
            let r0 = OUTPUT_DIM * c;
            for k in 0..OUTPUT_DIM {
                let row = r0 + k;
                let mut col = 0usize;
                for j in 0..HIDDEN_DIM {
                    let gate = mlp.w2[(k, j)] * hidden[j] * (1.0 - hidden[j]);
                    for xi in x.iter().take(INPUT_DIM) {
                        jbuf[(row, col)] = gate * xi;
                        col += 1;
                    }
                }
                for j in 0..HIDDEN_DIM {
                    jbuf[(row, B1_OFF + j)] = mlp.w2[(k, j)] * hidden[j] * (1.0 - hidden[j]);
                }
                for kk in 0..OUTPUT_DIM {
                    for j in 0..HIDDEN_DIM {
                        jbuf[(row, W2_OFF + kk * HIDDEN_DIM + j)] =
                            if kk == k { hidden[j] } else { 0.0 };
                    }
                    jbuf[(row, B2_OFF + kk)] = if kk == k { 1.0 } else { 0.0 };
                }
                let r = out[k] - t[k];
                rbuf[row] = r;
                residual_sq += r * r;
            }
            c += 1;
        }
        if c == 0 {
            break;
        }
        let jv = jbuf.rows(0, OUTPUT_DIM * c);
        let rv = rbuf.rows(0, OUTPUT_DIM * c);
        a.gemm_tr(1.0, &jv, &jv, 1.0);
        g.gemv_tr(1.0, &jv, &rv, 1.0);
        rows += c;
    }
    (residual_sq, rows)
}

fn validation_rmse(mlp: &Mlp, val: &[IkSample]) -> [f64; OUTPUT_DIM] {
    let mut sq = [0.0; OUTPUT_DIM];
    for s in val {
        let y = mlp.predict(&s.input);
        for k in 0..OUTPUT_DIM {
            let d = y[k] - s.target[k];
            sq[k] += d * d;
        }
    }
    let n = val.len().max(1) as f64;
    sq.map(|v| (v / n).sqrt())
}

/// Trains the network on `dataset`, holding out a validation split, and
/// returns the fitted model with a summary of the run.
pub fn train_mlp(dataset: &[IkSample], config: &TrainConfig) -> Result<(Mlp, TrainReport)> {
    let started = Instant::now();
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if dataset.len() < MIN_DATASET {
        return Err(Error::TooFewSamples {
            got: dataset.len(),
            need: MIN_DATASET,
        });
    }
    if !(config.validation_fraction > 0.0 && config.validation_fraction < 1.0) {
        return Err(Error::validation(
            "train.validation_fraction",
            "must lie strictly between 0 and 1",
        ));
    }
    if !(config.lambda0 > 0.0 && config.lambda0.is_finite()) {
        return Err(Error::validation("train.lambda0", "must be positive"));
    }
    if config.batch_size == 0 {
        return Err(Error::validation("train.batch_size", "must be positive"));
    }

    let (split, input_norm, output_norm) = split_and_standardize(dataset, config.validation_fraction);
    let train_len = split.train_x.len();
    let batch = config.batch_size.min(train_len);

    let mut mlp = Mlp::init(config.seed);
    mlp.input_norm = input_norm;
    mlp.output_norm = output_norm;

    let mut a = DMatrix::zeros(PARAM_COUNT, PARAM_COUNT);
    let mut g = DVector::zeros(PARAM_COUNT);
    let mut jbuf = DMatrix::zeros(OUTPUT_DIM * CHUNK, PARAM_COUNT);
    let mut rbuf = DVector::zeros(OUTPUT_DIM * CHUNK);

    let mut lambda = config.lambda0;
    let mut stop = StopReason::MaxEpochs;
    let mut accepted = 0usize;
    let mut final_loss = f64::NAN;
    let mut step_losses = Vec::new();

    'training: for epoch in 0..config.max_epochs {
        let ranges = batch_ranges(train_len, batch, epoch);
        let (residual_sq, rows) =
            accumulate_normal_equations(&mlp, &split, &ranges, &mut jbuf, &mut rbuf, &mut a, &mut g);
        let m = (OUTPUT_DIM * rows) as f64;
        let loss_before = residual_sq / (2.0 * m);
        if !loss_before.is_finite() {
            return Err(Error::DivergedTraining(format!(
                "non-finite batch loss at epoch {epoch}"
            )));
        }
        a.unscale_mut(m);
        g.unscale_mut(m);
        if g.norm() < config.gradient_tol {
            stop = StopReason::GradientConverged;
            if final_loss.is_nan() {
                final_loss = loss_before;
            }
            break;
        }

        let params = mlp.params();
        loop {
            let mut h = a.clone();
            for i in 0..PARAM_COUNT {
                h[(i, i)] += lambda;
            }
            let step = match Cholesky::new(h) {
                Some(ch) => ch.solve(&g),
                None => {
                    lambda *= 10.0;
                    if lambda > config.lambda_max {
                        stop = StopReason::DampingExhausted;
                        break 'training;
                    }
                    continue;
                }
            };
            let candidate = &params - &step;
            mlp.set_params(&candidate);
            let loss_after = batch_loss(&mlp, &split, &ranges);
            if !loss_after.is_finite() {
                return Err(Error::DivergedTraining(format!(
                    "non-finite loss while stepping at epoch {epoch}"
                )));
            }
            if loss_after <= loss_before {
                lambda = (lambda / 10.0).max(1e-15);
                final_loss = loss_after;
                accepted += 1;
                step_losses.push([loss_before, loss_after]);
                break;
            }
            mlp.set_params(&params);
            lambda *= 10.0;
            if lambda > config.lambda_max {
                stop = StopReason::DampingExhausted;
                break 'training;
            }
        }
    }

    if final_loss.is_nan() {
        let ranges = batch_ranges(train_len, batch, 0);
        final_loss = batch_loss(&mlp, &split, &ranges);
    }

    let report = TrainReport {
        epochs: accepted,
        final_loss,
        validation_rmse: validation_rmse(&mlp, &split.val),
        wall_seconds: started.elapsed().as_secs_f64(),
        stop,
        step_losses,
    };
    Ok((mlp, report))
}
