//! Inference for a learned configuration-space distance field.
//!
//! The network takes `[p; q]`, rescales each input to `[-1, 1]` with the
//! bounds stored in the weights file, and expands every scaled input `x` to
//! `[x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^(L-1) pi x), cos(2^(L-1) pi x)]`.
//! Features are laid out input by input. Hidden layers use softplus; the last
//! layer is linear with a single output.
//!
//! Weights file (the contract with the training side):
//!
//! ```text
//! {"version":1,"input_dim":d,"encoding_freqs":L,"input_bounds":[[lo,hi],...],
//!  "layers":[{"w":[[...],...],"b":[...],"act":"softplus"|"identity"},...]}
//! ```
//!
//! `w` is row-major with one row per output unit.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cdf::{Projector, TargetProjector};
use crate::error::{Error, Result};
use crate::io;
use crate::kinematics::{JointConfig, Point2, RobotModel};

pub const WEIGHTS_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Softplus,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Softplus => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `outputs x inputs`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    input_dim: usize,
    encoding_freqs: usize,
    input_bounds: Vec<(f64, f64)>,
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    version: u64,
    input_dim: usize,
    encoding_freqs: usize,
    input_bounds: Vec<[f64; 2]>,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    act: Activation,
}

impl MlpModel {
    pub fn new(
        input_dim: usize,
        encoding_freqs: usize,
        input_bounds: Vec<(f64, f64)>,
        layers: Vec<Layer>,
    ) -> Result<Self> {
        if input_dim < 3 {
            return Err(Error::Input("input_dim must cover a 2D point and at least one joint".into()));
        }
        if input_bounds.len() != input_dim {
            return Err(Error::Dimension {
                expected: input_dim,
                found: input_bounds.len(),
            });
        }
        if let Some((lo, hi)) = input_bounds.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Input(format!("input bound [{lo}, {hi}] must satisfy lo < hi")));
        }
        let Some(last) = layers.last() else {
            return Err(Error::Input("model has no layers".into()));
        };
        if last.activation != Activation::Identity {
            return Err(Error::Input("last layer must use the identity activation".into()));
        }
        let mut width = input_dim * (2 * encoding_freqs + 1);
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.ncols() != width {
                return Err(Error::Input(format!(
                    "layer {i} expects {} inputs, previous width is {width}",
                    layer.weights.ncols()
                )));
            }
            if layer.bias.len() != layer.weights.nrows() {
                return Err(Error::Input(format!("layer {i} bias length does not match its rows")));
            }
            width = layer.weights.nrows();
        }
        if width != 1 {
            return Err(Error::Input(format!("model output width is {width}, expected 1")));
        }
        Ok(MlpModel {
            input_dim,
            encoding_freqs,
            input_bounds,
            layers,
        })
    }

    /// Random weights with the given hidden widths, for tests and demos.
    pub fn random<R: Rng + ?Sized>(
        input_bounds: Vec<(f64, f64)>,
        encoding_freqs: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let input_dim = input_bounds.len();
        let mut width = input_dim * (2 * encoding_freqs + 1);
        let mut layers = Vec::new();
        for (i, &out) in hidden.iter().chain(std::iter::once(&1)).enumerate() {
            let scale = (1.0 / width as f64).sqrt();
            layers.push(Layer {
                weights: DMatrix::from_fn(out, width, |_, _| rng.random_range(-scale..scale)),
                bias: DVector::from_fn(out, |_, _| rng.random_range(-0.1..0.1)),
                activation: if i == hidden.len() {
                    Activation::Identity
                } else {
                    Activation::Softplus
                },
            });
            width = out;
        }
        Self::new(input_dim, encoding_freqs, input_bounds, layers)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn joint_dim(&self) -> usize {
        self.input_dim - 2
    }

    pub fn encoding_freqs(&self) -> usize {
        self.encoding_freqs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    fn check_input(&self, q: &[f64]) -> Result<()> {
        if q.len() + 2 != self.input_dim {
            return Err(Error::Dimension {
                expected: self.joint_dim(),
                found: q.len(),
            });
        }
        Ok(())
    }

    fn scaled_inputs(&self, p: &Point2, q: &[f64]) -> Vec<f64> {
        [p.x, p.y]
            .iter()
            .chain(q)
            .zip(&self.input_bounds)
            .map(|(x, (lo, hi))| 2.0 * (x - lo) / (hi - lo) - 1.0)
            .collect()
    }

    fn encode(&self, scaled: &[f64]) -> DVector<f64> {
        let per = 2 * self.encoding_freqs + 1;
        let mut out = DVector::zeros(scaled.len() * per);
        for (d, x) in scaled.iter().enumerate() {
            out[d * per] = *x;
            for l in 0..self.encoding_freqs {
                let w = (1u64 << l) as f64 * PI;
                out[d * per + 1 + 2 * l] = (w * x).sin();
                out[d * per + 2 + 2 * l] = (w * x).cos();
            }
        }
        out
    }

    /// Returns the pre-activations of every layer and the network output.
    fn run(&self, input: DVector<f64>) -> (Vec<DVector<f64>>, f64) {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = input;
        for layer in &self.layers {
            let z = &layer.weights * &a + &layer.bias;
            a = z.map(|v| layer.activation.apply(v));
            pre.push(z);
        }
        (pre, a[0])
    }

    pub fn forward(&self, p: &Point2, q: &[f64]) -> Result<f64> {
        self.check_input(q)?;
        Ok(self.run(self.encode(&self.scaled_inputs(p, q))).1)
    }

    /// Value and exact gradient with respect to `q`, by reverse-mode
    /// differentiation through the layers, the encoding and the input scaling.
    pub fn value_and_grad_q(&self, p: &Point2, q: &[f64]) -> Result<(f64, DVector<f64>)> {
        self.check_input(q)?;
        let scaled = self.scaled_inputs(p, q);
        let (pre, value) = self.run(self.encode(&scaled));

        let mut delta = DVector::from_element(1, 1.0);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let dz = delta.component_mul(&pre[i].map(|v| layer.activation.derivative(v)));
            delta = layer.weights.tr_mul(&dz);
        }

        let per = 2 * self.encoding_freqs + 1;
        let grad = DVector::from_fn(q.len(), |j, _| {
            let d = j + 2;
            let x = scaled[d];
            let mut g = delta[d * per];
            for l in 0..self.encoding_freqs {
                let w = (1u64 << l) as f64 * PI;
                g += delta[d * per + 1 + 2 * l] * w * (w * x).cos();
                g -= delta[d * per + 2 + 2 * l] * w * (w * x).sin();
            }
            let (lo, hi) = self.input_bounds[d];
            g * 2.0 / (hi - lo)
        });
        Ok((value, grad))
    }

    pub fn grad_q(&self, p: &Point2, q: &[f64]) -> Result<DVector<f64>> {
        Ok(self.value_and_grad_q(p, q)?.1)
    }

    pub fn to_json(&self) -> String {
        let file = WeightsFile {
            version: WEIGHTS_FORMAT_VERSION,
            input_dim: self.input_dim,
            encoding_freqs: self.encoding_freqs,
            input_bounds: self.input_bounds.iter().map(|(lo, hi)| [*lo, *hi]).collect(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    w: l.weights.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    b: l.bias.iter().copied().collect(),
                    act: l.activation,
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("weights serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WeightsFile = serde_json::from_str(text).map_err(|e| Error::parse(text, e))?;
        if file.version != WEIGHTS_FORMAT_VERSION {
            return Err(Error::Version {
                found: file.version,
                expected: WEIGHTS_FORMAT_VERSION,
            });
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for (i, l) in file.layers.into_iter().enumerate() {
            let rows = l.w.len();
            let cols = l.w.first().map_or(0, Vec::len);
            if l.w.iter().any(|r| r.len() != cols) {
                return Err(Error::Input(format!("layer {i} weight rows differ in length")));
            }
            layers.push(Layer {
                weights: DMatrix::from_row_iterator(rows, cols, l.w.into_iter().flatten()),
                bias: DVector::from_vec(l.b),
                activation: l.act,
            });
        }
        Self::new(
            file.input_dim,
            file.encoding_freqs,
            file.input_bounds.into_iter().map(|[lo, hi]| (lo, hi)).collect(),
            layers,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&io::read_to_string(path.as_ref())?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_atomic(path.as_ref(), self.to_json().as_bytes())
    }
}

pub fn mlp_forward(model: &MlpModel, p: &Point2, q: &[f64]) -> Result<f64> {
    model.forward(p, q)
}

pub fn mlp_grad_q(model: &MlpModel, p: &Point2, q: &[f64]) -> Result<DVector<f64>> {
    model.grad_q(p, q)
}

/// Projection onto the learned zero level set. The gradient is normalized
/// before each step since a learned field is only approximately eikonal.
pub fn neural_project(model: &MlpModel, robot: &RobotModel, p: &Point2, q: &[f64], iters: usize) -> Result<JointConfig> {
    robot.check_dim(q)?;
    let mut current = JointConfig(q.to_vec());
    for _ in 0..iters {
        let (value, grad) = model.value_and_grad_q(p, &current)?;
        if value == 0.0 {
            break;
        }
        let norm = grad.norm();
        if !(norm >= 1e-8) {
            return Err(Error::VanishingGradient { norm });
        }
        for (v, g) in current.iter_mut().zip(grad.iter()) {
            *v -= value * g / norm;
        }
        robot.clamp(&mut current);
    }
    Ok(current)
}

/// A learned field paired with the robot whose limits bound the projection.
pub struct NeuralField<'a> {
    pub model: &'a MlpModel,
    pub robot: &'a RobotModel,
}

struct NeuralTarget<'a> {
    field: &'a NeuralField<'a>,
    point: Point2,
}

impl Projector for NeuralField<'_> {
    fn target<'b>(&'b self, p: &Point2) -> Result<Box<dyn TargetProjector + 'b>> {
        Ok(Box::new(NeuralTarget { field: self, point: *p }))
    }
}

impl TargetProjector for NeuralTarget<'_> {
    fn project(&self, q: &JointConfig, iters: usize) -> Result<JointConfig> {
        neural_project(self.field.model, self.field.robot, &self.point, q, iters)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn bounds(n: usize) -> Vec<(f64, f64)> {
        let mut b = vec![(-4.0, 4.0); 2];
        b.extend(std::iter::repeat_n((-PI, PI), n));
        b
    }

    fn constant(value: f64, freqs: usize) -> MlpModel {
        let width = 4 * (2 * freqs + 1);
        MlpModel::new(
            4,
            freqs,
            bounds(2),
            vec![Layer {
                weights: DMatrix::zeros(1, width),
                bias: DVector::from_element(1, value),
                activation: Activation::Identity,
            }],
        )
        .unwrap()
    }

    #[test]
    fn constant_network() {
        let m = constant(0.7, 8);
        let p = Point2::new(1.0, -2.0);
        assert_eq!(m.forward(&p, &[0.3, 0.1]).unwrap(), 0.7);
        assert!(m.grad_q(&p, &[0.3, 0.1]).unwrap().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn hand_computed_two_unit_net() {
        // No encoding frequencies: the net sees the scaled inputs directly.
        // Bounds [-1, 1] leave inputs unscaled.
        let hidden = Layer {
            weights: DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, -1.0, 0.5]),
            bias: DVector::from_vec(vec![0.1, -0.2]),
            activation: Activation::Softplus,
        };
        let out = Layer {
            weights: DMatrix::from_row_slice(1, 2, &[3.0, -1.0]),
            bias: DVector::from_element(1, 0.25),
            activation: Activation::Identity,
        };
        let m = MlpModel::new(3, 0, vec![(-1.0, 1.0); 3], vec![hidden, out]).unwrap();
        let (x, y, q) = (0.2, -0.4, 0.3);
        let sp = |z: f64| (1.0 + z.exp()).ln();
        let z1 = x + 2.0 * q + 0.1;
        let z2 = -y + 0.5 * q - 0.2;
        let expected = 3.0 * sp(z1) - sp(z2) + 0.25;
        let got = m.forward(&Point2::new(x, y), &[q]).unwrap();
        assert!((got - expected).abs() < 1e-12);
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let dq = 3.0 * sig(z1) * 2.0 - sig(z2) * 0.5;
        assert!((m.grad_q(&Point2::new(x, y), &[q]).unwrap()[0] - dq).abs() < 1e-12);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..5 {
            let m = MlpModel::random(bounds(3), 8 - trial, &[32, 32, 32, 32], &mut rng).unwrap();
            for _ in 0..20 {
                let p = Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                let q: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                let grad = m.grad_q(&p, &q).unwrap();
                let h = 1e-5;
                for j in 0..3 {
                    let mut qp = q.clone();
                    let mut qm = q.clone();
                    qp[j] += h;
                    qm[j] -= h;
                    let fd = (m.forward(&p, &qp).unwrap() - m.forward(&p, &qm).unwrap()) / (2.0 * h);
                    assert!((fd - grad[j]).abs() < 1e-4, "{fd} vs {}", grad[j]);
                }
            }
        }
    }

    #[test]
    fn weights_round_trip_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = MlpModel::random(bounds(2), 8, &[16, 16], &mut rng).unwrap();
        let back = MlpModel::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);
        for _ in 0..50 {
            let p = Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let q = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            assert_eq!(m.forward(&p, &q).unwrap().to_bits(), back.forward(&p, &q).unwrap().to_bits());
        }
    }

    #[test]
    fn shape_errors() {
        let m = constant(0.0, 2);
        assert!(matches!(m.forward(&Point2::zeros(), &[0.0]), Err(Error::Dimension { .. })));
        let bad = Layer {
            weights: DMatrix::zeros(1, 7),
            bias: DVector::zeros(1),
            activation: Activation::Identity,
        };
        assert!(MlpModel::new(4, 2, bounds(2), vec![bad]).is_err());
        let soft_last = Layer {
            weights: DMatrix::zeros(1, 20),
            bias: DVector::zeros(1),
            activation: Activation::Softplus,
        };
        assert!(MlpModel::new(4, 2, bounds(2), vec![soft_last]).is_err());
    }

    #[test]
    fn projection_edge_cases() {
        let robot = RobotModel::two_link();
        let zero = constant(0.0, 1);
        let q = [0.4, -0.3];
        assert_eq!(neural_project(&zero, &robot, &Point2::zeros(), &q, 3).unwrap().0, q.to_vec());
        let flat = constant(0.5, 1);
        assert!(matches!(
            neural_project(&flat, &robot, &Point2::zeros(), &q, 1),
            Err(Error::VanishingGradient { .. })
        ));
    }

    #[test]
    fn linear_field_projects_onto_its_zero_level() {
        // f = q1 - 0.5 (no encoding, bounds [-1, 1]): one step hits q1 = 0.5.
        let mut w = DMatrix::zeros(1, 4);
        w[(0, 2)] = 1.0;
        let m = MlpModel::new(
            4,
            0,
            vec![(-1.0, 1.0); 4],
            vec![Layer {
                weights: w,
                bias: DVector::from_element(1, -0.5),
                activation: Activation::Identity,
            }],
        )
        .unwrap();
        let out = neural_project(&m, &RobotModel::two_link(), &Point2::zeros(), &[-0.5, 0.2], 1).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-12 && (out[1] - 0.2).abs() < 1e-12);
    }
}
