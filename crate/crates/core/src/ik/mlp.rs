//! Feed-forward network mapping a desired foot state to a joint configuration.
//!
//! The architecture is fixed: six inputs (tip position and velocity), one
//! hidden layer of twenty sigmoid units, nine linear outputs (three joint
//! angles, hip axis, ankle axis). Inputs and outputs are standardized with
//! statistics stored alongside the weights, so a saved model is self-contained.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limb::JointState;
use crate::quat::PureQuaternion;

pub const INPUT_DIM: usize = 6;
pub const HIDDEN_DIM: usize = 20;
pub const OUTPUT_DIM: usize = 9;

/// Total number of trainable parameters: both weight matrices plus biases.
pub const PARAM_COUNT: usize =
    HIDDEN_DIM * INPUT_DIM + HIDDEN_DIM + OUTPUT_DIM * HIDDEN_DIM + OUTPUT_DIM;

/// Version tag written into saved model files.
pub const MODEL_FORMAT: &str = "dqlimb-mlp/1";

/// Per-component affine normalization, fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: DVector<f64>,
    pub std: DVector<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: DVector::zeros(dim),
            std: DVector::from_element(dim, 1.0),
        }
    }

    /// Fits mean and standard deviation over `rows`, flooring the deviation
    /// so constant components stay invertible.
    pub fn fit<'a, I>(dim: usize, rows: I) -> Self
    where
        I: Iterator<Item = &'a [f64]> + Clone,
    {
        let mut mean = DVector::zeros(dim);
        let mut count = 0usize;
        for row in rows.clone() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            count += 1;
        }
        if count > 0 {
            mean /= count as f64;
        }
        let mut var = DVector::zeros(dim);
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(mean.iter()) {
                let d = v - m;
                *s += d * d;
            }
        }
        if count > 1 {
            var /= (count - 1) as f64;
        }
        let std = var.map(|v| v.sqrt().max(1e-12));
        Standardizer { mean, std }
    }

    pub fn apply(&self, raw: &[f64], out: &mut [f64]) {
        for i in 0..raw.len() {
            out[i] = (raw[i] - self.mean[i]) / self.std[i];
        }
    }

    pub fn invert(&self, standardized: &[f64], out: &mut [f64]) {
        for i in 0..standardized.len() {
            out[i] = standardized[i] * self.std[i] + self.mean[i];
        }
    }
}

/// The trained regressor: weights, biases, and the normalization that framed
/// them during training.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// Hidden-layer weights, `HIDDEN_DIM x INPUT_DIM`.
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// Output-layer weights, `OUTPUT_DIM x HIDDEN_DIM`.
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub input_norm: Standardizer,
    pub output_norm: Standardizer,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Mlp {
    /// Xavier-uniform weight initialization with zero biases; deterministic
    /// for a given seed.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let a1 = (6.0 / (INPUT_DIM + HIDDEN_DIM) as f64).sqrt();
        let w1 = DMatrix::from_fn(HIDDEN_DIM, INPUT_DIM, |_, _| rng.gen_range(-a1..a1));
        let a2 = (6.0 / (HIDDEN_DIM + OUTPUT_DIM) as f64).sqrt();
        let w2 = DMatrix::from_fn(OUTPUT_DIM, HIDDEN_DIM, |_, _| rng.gen_range(-a2..a2));
        Mlp {
            w1,
            b1: DVector::zeros(HIDDEN_DIM),
            w2,
            b2: DVector::zeros(OUTPUT_DIM),
            input_norm: Standardizer::identity(INPUT_DIM),
            output_norm: Standardizer::identity(OUTPUT_DIM),
        }
    }

    /// Forward pass in standardized coordinates. Writes the hidden activation
    /// into `hidden` and the network output into `out`.
    pub(crate) fn forward_standardized(&self, x: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        for j in 0..HIDDEN_DIM {
            let mut z = self.b1[j];
            for i in 0..INPUT_DIM {
                z += self.w1[(j, i)] * x[i];
            }
            hidden[j] = sigmoid(z);
        }
        for k in 0..OUTPUT_DIM {
            let mut z = self.b2[k];
            for j in 0..HIDDEN_DIM {
                z += self.w2[(k, j)] * hidden[j];
            }
            out[k] = z;
        }
    }

    /// Maps a physical six-component input to the nine physical outputs.
    pub fn predict(&self, input: &[f64; INPUT_DIM]) -> [f64; OUTPUT_DIM] {
        let mut x = [0.0; INPUT_DIM];
        self.input_norm.apply(input, &mut x);
        let mut hidden = [0.0; HIDDEN_DIM];
        let mut y = [0.0; OUTPUT_DIM];
        self.forward_standardized(&x, &mut hidden, &mut y);
        let mut out = [0.0; OUTPUT_DIM];
        self.output_norm.invert(&y, &mut out);
        out
    }

    /// Flattens all parameters into one vector: hidden weights row-major,
    /// hidden biases, output weights row-major, output biases.
    pub(crate) fn params(&self) -> DVector<f64> {
        let mut p = DVector::zeros(PARAM_COUNT);
        let mut k = 0;
        for j in 0..HIDDEN_DIM {
            for i in 0..INPUT_DIM {
                p[k] = self.w1[(j, i)];
                k += 1;
            }
        }
        for j in 0..HIDDEN_DIM {
            p[k] = self.b1[j];
            k += 1;
        }
        for o in 0..OUTPUT_DIM {
            for j in 0..HIDDEN_DIM {
                p[k] = self.w2[(o, j)];
                k += 1;
            }
        }
        for o in 0..OUTPUT_DIM {
            p[k] = self.b2[o];
            k += 1;
        }
        p
    }

    pub(crate) fn set_params(&mut self, p: &DVector<f64>) {
        let mut k = 0;
        for j in 0..HIDDEN_DIM {
            for i in 0..INPUT_DIM {
                self.w1[(j, i)] = p[k];
                k += 1;
            }
        }
        for j in 0..HIDDEN_DIM {
            self.b1[j] = p[k];
            k += 1;
        }
        for o in 0..OUTPUT_DIM {
            for j in 0..HIDDEN_DIM {
                self.w2[(o, j)] = p[k];
                k += 1;
            }
        }
        for o in 0..OUTPUT_DIM {
            self.b2[o] = p[k];
            k += 1;
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Serializes the model to its versioned text form.
    pub fn render(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            input_dim: INPUT_DIM,
            hidden_dim: HIDDEN_DIM,
            output_dim: OUTPUT_DIM,
            input_mean: self.input_norm.mean.iter().copied().collect(),
            input_std: self.input_norm.std.iter().copied().collect(),
            output_mean: self.output_norm.mean.iter().copied().collect(),
            output_std: self.output_norm.std.iter().copied().collect(),
            w1: self.w1.transpose().as_slice().to_vec(),
            b1: self.b1.as_slice().to_vec(),
            w2: self.w2.transpose().as_slice().to_vec(),
            b2: self.b2.as_slice().to_vec(),
        };
        toml::to_string(&file).expect("model serialization cannot fail")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ModelFile =
            toml::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Parse(format!(
                "model file: unsupported format {:?}, expected {:?}",
                file.format, MODEL_FORMAT
            )));
        }
        if file.input_dim != INPUT_DIM
            || file.hidden_dim != HIDDEN_DIM
            || file.output_dim != OUTPUT_DIM
        {
            return Err(Error::Parse(format!(
                "model file: dimensions {}x{}x{} do not match the {}x{}x{} architecture",
                file.input_dim, file.hidden_dim, file.output_dim, INPUT_DIM, HIDDEN_DIM, OUTPUT_DIM
            )));
        }
        let expect = |name: &str, got: usize, need: usize| -> Result<()> {
            if got == need {
                Ok(())
            } else {
                Err(Error::Parse(format!(
                    "model file: field {name} has {got} entries, expected {need}"
                )))
            }
        };
        expect("input_mean", file.input_mean.len(), INPUT_DIM)?;
        expect("input_std", file.input_std.len(), INPUT_DIM)?;
        expect("output_mean", file.output_mean.len(), OUTPUT_DIM)?;
        expect("output_std", file.output_std.len(), OUTPUT_DIM)?;
        expect("w1", file.w1.len(), HIDDEN_DIM * INPUT_DIM)?;
        expect("b1", file.b1.len(), HIDDEN_DIM)?;
        expect("w2", file.w2.len(), OUTPUT_DIM * HIDDEN_DIM)?;
        expect("b2", file.b2.len(), OUTPUT_DIM)?;
        let all = file
            .input_mean
            .iter()
            .chain(&file.input_std)
            .chain(&file.output_mean)
            .chain(&file.output_std)
            .chain(&file.w1)
            .chain(&file.b1)
            .chain(&file.w2)
            .chain(&file.b2);
        if !all.clone().all(|v| v.is_finite()) {
            return Err(Error::Parse(
                "model file: contains non-finite values".to_string(),
            ));
        }
        drop(all);
        Ok(Mlp {
            w1: DMatrix::from_row_slice(HIDDEN_DIM, INPUT_DIM, &file.w1),
            b1: DVector::from_vec(file.b1),
            w2: DMatrix::from_row_slice(OUTPUT_DIM, HIDDEN_DIM, &file.w2),
            b2: DVector::from_vec(file.b2),
            input_norm: Standardizer {
                mean: DVector::from_vec(file.input_mean),
                std: DVector::from_vec(file.input_std),
            },
            output_norm: Standardizer {
                mean: DVector::from_vec(file.output_mean),
                std: DVector::from_vec(file.output_std),
            },
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    output_mean: Vec<f64>,
    output_std: Vec<f64>,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

/// Network output for one query, both as emitted and after snapping the two
/// axis blocks back onto the unit sphere.
#[derive(Debug, Clone)]
pub struct IkPrediction {
    /// The nine outputs exactly as the network produced them.
    pub raw: [f64; OUTPUT_DIM],
    /// The same outputs reassembled into a joint state with unit axes.
    pub state: JointState,
}

pub(crate) fn renormalize_axis(x: f64, y: f64, z: f64) -> PureQuaternion {
    let v = PureQuaternion::new(x, y, z);
    let n = v.norm();
    if n > 1e-9 && n.is_finite() {
        v.scale(1.0 / n)
    } else {
        crate::limb::KNEE_AXIS
    }
}

/// Runs the network on a desired tip position and velocity. Total on finite
/// inputs: degenerate axis outputs fall back to the knee axis rather than
/// failing.
pub fn ik_infer(mlp: &Mlp, position: PureQuaternion, velocity: PureQuaternion) -> IkPrediction {
    let input = [
        position.x, position.y, position.z, velocity.x, velocity.y, velocity.z,
    ];
    let raw = mlp.predict(&input);
    let state = JointState::new(
        [raw[0], raw[1], raw[2]],
        renormalize_axis(raw[3], raw[4], raw[5]),
        renormalize_axis(raw[6], raw[7], raw[8]),
    );
    IkPrediction { raw, state }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn standardizer_round_trips() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, -2.0], vec![3.0, 0.0], vec![5.0, 2.0]];
        let norm = Standardizer::fit(2, rows.iter().map(|r| r.as_slice()));
        assert_relative_eq!(norm.mean[0], 3.0);
        assert_relative_eq!(norm.mean[1], 0.0);
        let mut std_row = [0.0; 2];
        let mut back = [0.0; 2];
        norm.apply(&rows[0], &mut std_row);
        norm.invert(&std_row, &mut back);
        assert_relative_eq!(back[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(back[1], -2.0, epsilon = 1e-14);
    }

    #[test]
    fn params_round_trip_through_flat_vector() {
        let mlp = Mlp::init(7);
        let p = mlp.params();
        assert_eq!(p.len(), PARAM_COUNT);
        let mut other = Mlp::init(8);
        other.set_params(&p);
        assert_eq!(other.w1, mlp.w1);
        assert_eq!(other.b1, mlp.b1);
        assert_eq!(other.w2, mlp.w2);
        assert_eq!(other.b2, mlp.b2);
    }

    #[test]
    fn model_file_round_trips_exactly() {
        let mut mlp = Mlp::init(42);
        mlp.input_norm.mean[2] = 0.125;
        mlp.output_norm.std[4] = 2.5;
        let text = mlp.render();
        let back = Mlp::parse(&text).unwrap();
        assert_eq!(back, mlp);
        assert!(text.starts_with("format = \"dqlimb-mlp/1\""));
    }

    #[test]
    fn wrong_format_tag_is_rejected() {
        let mlp = Mlp::init(1);
        let text = mlp.render().replace("dqlimb-mlp/1", "dqlimb-mlp/9");
        match Mlp::parse(&text) {
            Err(Error::Parse(msg)) => assert!(msg.contains("unsupported format")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_weights_are_rejected() {
        let mlp = Mlp::init(1);
        let mut file: toml::Value = toml::from_str(&mlp.render()).unwrap();
        let w1 = file.get_mut("w1").unwrap().as_array_mut().unwrap();
        w1.pop();
        let text = toml::to_string(&file).unwrap();
        assert!(matches!(Mlp::parse(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn inference_renormalizes_axes() {
        let mlp = Mlp::init(3);
        let pred = ik_infer(
            &mlp,
            PureQuaternion::new(0.8, 0.1, 0.1),
            PureQuaternion::ZERO,
        );
        assert_relative_eq!(pred.state.hip_axis.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(pred.state.ankle_axis.norm(), 1.0, epsilon = 1e-12);
        for v in pred.raw {
            assert!(v.is_finite());
        }
    }
}
