use nalgebra::Matrix4;
use num_complex::Complex64;

use super::{InputMode, OutputMode};
use crate::{Error, Result};

/// Accepted deviation `max |UU† - I|` for matrices fed to the outcome models.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Phase convention of the 50:50 beam splitter.
///
/// Detection probabilities do not depend on the choice; it is exposed so
/// that the independence can be checked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum BsConvention {
    /// Real matrix: transmission `+√(1-r)`, reflection `-√r` for light
    /// entering from Bob's side and `+√r` from Alice's side.
    #[default]
    RealAntisymmetric,
    /// Symmetric matrix with reflection phase `i`.
    SymmetricPhase,
}

/// Geometry of the relay: beam-splitter reflectivity plus two polarization
/// rotations modelling misalignment, one on Bob's input arm and one on
/// output port 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    input_rotation: f64,
    output_rotation: f64,
    reflectivity: f64,
    convention: BsConvention,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::ideal()
    }
}

impl NetworkConfig {
    pub fn new(input_rotation: f64, output_rotation: f64, reflectivity: f64) -> Result<Self> {
        if !input_rotation.is_finite() {
            return Err(Error::param("input_rotation", "must be finite"));
        }
        if !output_rotation.is_finite() {
            return Err(Error::param("output_rotation", "must be finite"));
        }
        if !(0.0..=1.0).contains(&reflectivity) {
            return Err(Error::param(
                "reflectivity",
                format!("must lie in [0, 1], got {reflectivity}"),
            ));
        }
        Ok(Self {
            input_rotation,
            output_rotation,
            reflectivity,
            convention: BsConvention::default(),
        })
    }

    /// Balanced beam splitter, no rotations.
    pub fn ideal() -> Self {
        Self {
            input_rotation: 0.0,
            output_rotation: 0.0,
            reflectivity: 0.5,
            convention: BsConvention::default(),
        }
    }

    /// Splits a total misalignment fraction evenly over the two rotations.
    /// A fraction `e` per rotation becomes the angle `asin(√e)`, so a single
    /// photon passing one rotation flips polarization with probability `e`.
    pub fn with_misalignment(total: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&total) {
            return Err(Error::param(
                "misalignment",
                format!("must lie in [0, 1], got {total}"),
            ));
        }
        let theta = misalignment_angle(total / 2.0);
        Self::new(theta, theta, 0.5)
    }

    pub fn with_convention(mut self, convention: BsConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn input_rotation(&self) -> f64 {
        self.input_rotation
    }

    pub fn output_rotation(&self) -> f64 {
        self.output_rotation
    }

    pub fn reflectivity(&self) -> f64 {
        self.reflectivity
    }

    pub fn convention(&self) -> BsConvention {
        self.convention
    }
}

/// Rotation angle whose polarization-flip probability is `fraction`.
pub fn misalignment_angle(fraction: f64) -> f64 {
    fraction.sqrt().asin()
}

/// Mode-amplitude map from source modes to detector modes, indexed
/// `[output][input]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix(Matrix4<Complex64>);

impl TransferMatrix {
    /// Wraps an arbitrary matrix. Unitarity is checked by the consumers.
    pub fn from_matrix(m: Matrix4<Complex64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.0
    }

    pub fn entry(&self, output: OutputMode, input: InputMode) -> Complex64 {
        self.0[(output.index(), input.index())]
    }

    pub fn apply(&self, input: &[Complex64; 4]) -> [Complex64; 4] {
        std::array::from_fn(|k| (0..4).map(|i| self.0[(k, i)] * input[i]).sum())
    }

    /// `max |(UU†)_{ij} - δ_{ij}|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = self.0 * self.0.adjoint();
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn ensure_unitary(&self) -> Result<()> {
        let deviation = self.unitarity_deviation();
        if deviation.is_finite() && deviation < UNITARITY_TOL {
            Ok(())
        } else {
            Err(Error::NotUnitary { deviation })
        }
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Polarization rotation `H → cH + sV`, `V → -sH + cV` on the mode pair
/// starting at `first`, identity elsewhere.
fn rotation_on(first: usize, theta: f64) -> Matrix4<Complex64> {
    let (s, c) = theta.sin_cos();
    let mut m = Matrix4::identity();
    m[(first, first)] = real(c);
    m[(first + 1, first)] = real(s);
    m[(first, first + 1)] = real(-s);
    m[(first + 1, first + 1)] = real(c);
    m
}

/// Beam splitter acting on spatial modes, polarization-preserving. Maps
/// `(A_H, A_V, B_H, B_V)` to `(port1_H, port1_V, port2_H, port2_V)`.
fn beam_splitter(reflectivity: f64, convention: BsConvention) -> Matrix4<Complex64> {
    let t = (1.0 - reflectivity).sqrt();
    let r = reflectivity.sqrt();
    // [[port1 <- A, port1 <- B], [port2 <- A, port2 <- B]]
    let block = match convention {
        BsConvention::RealAntisymmetric => [[real(t), real(-r)], [real(r), real(t)]],
        BsConvention::SymmetricPhase => [
            [real(t), Complex64::new(0.0, r)],
            [Complex64::new(0.0, r), real(t)],
        ],
    };
    let mut m = Matrix4::zeros();
    for pol in 0..2 {
        for (port, row) in block.iter().enumerate() {
            for (side, &v) in row.iter().enumerate() {
                m[(2 * port + pol, 2 * side + pol)] = v;
            }
        }
    }
    m
}

/// Composes Bob's input rotation, the beam splitter, the port-1 output
/// rotation and the PBS routing into a single transfer matrix. The PBS maps
/// `port1_H → D1H, port1_V → D1V, port2_H → D2H, port2_V → D2V`, which is
/// the identity in the crate's mode ordering.
pub fn build_network(cfg: &NetworkConfig) -> TransferMatrix {
    let input = rotation_on(InputMode::BobH.index(), cfg.input_rotation);
    let bs = beam_splitter(cfg.reflectivity, cfg.convention);
    let output = rotation_on(OutputMode::D1H.index(), cfg.output_rotation);
    TransferMatrix(output * bs * input)
}
