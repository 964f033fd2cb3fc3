//! Plane-wave transmission through layered elastic stacks.
//!
//! Each polarization branch is treated as a scalar wave (no mode
//! conversion). A layer of thickness `d`, speed `v` and impedance `Z`
//! contributes the characteristic matrix
//!
//! ```text
//! [ cos φ        -i sin φ / η ]      φ = ω d cos θ / v
//! [ -i η sin φ    cos φ       ]      η = Z cos θ
//! ```
//!
//! with the refraction angle fixed by the conserved lateral slowness
//! `sin θ / v`. Where `sin θ > 1` the decaying branch of `cos θ` is used.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::materials::{Material, MaterialError, MaterialRegistry, Polarization};

#[derive(Debug, Error, PartialEq)]
pub enum AcousticsError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("layer {index}: thickness must be positive, got {thickness} m")]
    BadThickness { index: usize, thickness: f64 },
    #[error("invalid stack geometry: {0}")]
    BadGeometry(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub material: Material,
    /// m
    pub thickness: f64,
}

/// Layers between two semi-infinite substrates. The hot substrate is the
/// side phonons are emitted from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    hot_substrate: Material,
    layers: Vec<Layer>,
    cold_substrate: Material,
}

impl LayerStack {
    pub fn new(
        hot_substrate: Material,
        layers: Vec<Layer>,
        cold_substrate: Material,
    ) -> Result<Self, AcousticsError> {
        for (index, l) in layers.iter().enumerate() {
            if !(l.thickness.is_finite() && l.thickness > 0.0) {
                return Err(AcousticsError::BadThickness {
                    index,
                    thickness: l.thickness,
                });
            }
            l.material.validate()?;
        }
        hot_substrate.validate()?;
        cold_substrate.validate()?;
        Ok(LayerStack {
            hot_substrate,
            layers,
            cold_substrate,
        })
    }

    /// Bare interface between two substrates.
    pub fn interface(hot: Material, cold: Material) -> Self {
        LayerStack {
            hot_substrate: hot,
            layers: Vec::new(),
            cold_substrate: cold,
        }
    }

    pub fn hot_substrate(&self) -> &Material {
        &self.hot_substrate
    }

    pub fn cold_substrate(&self) -> &Material {
        &self.cold_substrate
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn total_thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness).sum()
    }

    /// Same stack seen from the cold side.
    pub fn reversed(&self) -> LayerStack {
        LayerStack {
            hot_substrate: self.cold_substrate.clone(),
            layers: self.layers.iter().rev().cloned().collect(),
            cold_substrate: self.hot_substrate.clone(),
        }
    }

    /// Every medium, hot substrate first.
    pub fn media(&self) -> impl Iterator<Item = &Material> {
        std::iter::once(&self.hot_substrate)
            .chain(self.layers.iter().map(|l| &l.material))
            .chain(std::iter::once(&self.cold_substrate))
    }

    pub fn supports(&self, pol: Polarization) -> bool {
        self.media().all(|m| m.speed(pol).is_ok())
    }

    /// Gaussian thickness jitter with standard deviation `sigma` (m) per
    /// layer. Draws that would make a layer thinner than 1% of its nominal
    /// thickness are clamped there.
    pub fn jittered(&self, sigma: f64, seed: u64) -> Result<LayerStack, AcousticsError> {
        if sigma == 0.0 {
            return Ok(self.clone());
        }
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| AcousticsError::BadGeometry(format!("jitter sigma: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                material: l.material.clone(),
                thickness: (l.thickness + normal.sample(&mut rng)).max(0.01 * l.thickness),
            })
            .collect();
        LayerStack::new(self.hot_substrate.clone(), layers, self.cold_substrate.clone())
    }

    /// Resolves the speeds and impedances of one polarization branch.
    pub fn branch(&self, pol: Polarization) -> Result<AcousticBranch, AcousticsError> {
        let mut speeds = Vec::with_capacity(self.layers.len() + 2);
        let mut impedances = Vec::with_capacity(self.layers.len() + 2);
        for m in self.media() {
            let v = m.speed(pol)?;
            speeds.push(v);
            impedances.push(m.density * v);
        }
        Ok(AcousticBranch {
            speeds,
            impedances,
            thicknesses: self.layers.iter().map(|l| l.thickness).collect(),
        })
    }

    /// Same as [`LayerStack::branch`] but every medium uses its transverse
    /// properties.
    pub fn transverse_branch(&self) -> AcousticBranch {
        self.branch(Polarization::Transverse)
            .expect("transverse speed is mandatory")
    }
}

/// Speeds and impedances of all media for one polarization, hot substrate
/// first and cold substrate last.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticBranch {
    speeds: Vec<f64>,
    impedances: Vec<f64>,
    thicknesses: Vec<f64>,
}

impl AcousticBranch {
    /// Build a branch from raw `(speed, impedance)` media and layer
    /// thicknesses. `media.len()` must equal `thicknesses.len() + 2`.
    pub fn from_parts(media: Vec<(f64, f64)>, thicknesses: Vec<f64>) -> Self {
        assert_eq!(media.len(), thicknesses.len() + 2, "two substrates plus one medium per layer");
        let (speeds, impedances) = media.into_iter().unzip();
        AcousticBranch {
            speeds,
            impedances,
            thicknesses,
        }
    }

    pub fn emitter_speed(&self) -> f64 {
        self.speeds[0]
    }

    /// Total one-way normal-incidence transit time Σ d/v, s.
    pub fn transit_time(&self) -> f64 {
        self.thicknesses
            .iter()
            .zip(&self.speeds[1..])
            .map(|(d, v)| d / v)
            .sum()
    }

    /// Fabry–Pérot fringe period in ω, rad/s, or `None` for a bare interface.
    pub fn fringe_period(&self) -> Option<f64> {
        let tau = self.transit_time();
        (tau > 0.0).then(|| std::f64::consts::PI / tau)
    }

    /// Geometry at incidence angle `theta0` (rad) in the hot substrate.
    pub fn at_angle(&self, theta0: f64) -> ObliqueBranch {
        self.at_slowness(theta0.sin() / self.speeds[0])
    }

    /// Geometry at lateral slowness `p = sin θ / v` (s/m).
    pub fn at_slowness(&self, p: f64) -> ObliqueBranch {
        let n = self.speeds.len();
        let mut eta = Vec::with_capacity(n);
        let mut kz = Vec::with_capacity(n);
        for j in 0..n {
            let s = p * self.speeds[j];
            let s2 = s * s;
            let cos = if s2 <= 1.0 {
                Complex64::new((1.0 - s2).sqrt(), 0.0)
            } else {
                // decays for e^{i(k_z z - ω t)}
                Complex64::new(0.0, (s2 - 1.0).sqrt())
            };
            eta.push(cos * self.impedances[j]);
            kz.push(cos / self.speeds[j]);
        }
        let phase_per_omega = self
            .thicknesses
            .iter()
            .zip(&kz[1..n - 1])
            .map(|(d, k)| k * *d)
            .collect();
        ObliqueBranch {
            eta,
            phase_per_omega,
        }
    }

    /// Energy transmission coefficient at angular frequency `omega` and
    /// incidence angle `theta0`.
    pub fn transmission(&self, omega: f64, theta0: f64) -> f64 {
        self.at_angle(theta0).transmission(omega)
    }
}

/// Reflection and transmission of one (ω, angle) evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    /// Amplitude reflection coefficient.
    pub r: Complex64,
    /// Energy reflectance |r|².
    pub reflectance: f64,
    /// Energy transmittance.
    pub transmittance: f64,
}

/// A branch with the angle-dependent quantities precomputed; only the
/// frequency varies from here on.
#[derive(Debug, Clone, PartialEq)]
pub struct ObliqueBranch {
    eta: Vec<Complex64>,
    phase_per_omega: Vec<Complex64>,
}

const RESCALE_AT: f64 = 1e100;

impl ObliqueBranch {
    pub fn response(&self, omega: f64) -> Response {
        let n = self.eta.len();
        let eta0 = self.eta[0];
        let eta_s = self.eta[n - 1];
        if eta0.re <= 0.0 {
            // grazing or evanescent in the emitter: nothing propagates
            return Response {
                r: Complex64::new(1.0, 0.0),
                reflectance: 1.0,
                transmittance: 0.0,
            };
        }

        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let mut m = [[one, zero], [zero, one]];
        let mut log_scale = 0.0f64;
        let i = Complex64::i();
        for (k, phase) in self.phase_per_omega.iter().enumerate() {
            let eta = self.eta[k + 1];
            let phi = phase * omega;
            let (c, s) = scaled_cos_sin(phi, &mut log_scale);
            let l = [[c, -i * s / eta], [-i * eta * s, c]];
            m = [
                [
                    m[0][0] * l[0][0] + m[0][1] * l[1][0],
                    m[0][0] * l[0][1] + m[0][1] * l[1][1],
                ],
                [
                    m[1][0] * l[0][0] + m[1][1] * l[1][0],
                    m[1][0] * l[0][1] + m[1][1] * l[1][1],
                ],
            ];
            let big = m
                .iter()
                .flatten()
                .map(|z| z.norm())
                .fold(0.0f64, f64::max);
            if big > RESCALE_AT {
                for z in m.iter_mut().flatten() {
                    *z /= big;
                }
                log_scale += big.ln();
            }
        }

        let a = (m[0][0] + m[0][1] * eta_s) * eta0;
        let b = m[1][0] + m[1][1] * eta_s;
        let denom = a + b;
        let r = (a - b) / denom;
        let transmittance = if eta_s.re > 0.0 {
            let t2 = 4.0 * eta0.re * eta0.re / denom.norm_sqr() * (-2.0 * log_scale).exp();
            eta_s.re / eta0.re * t2
        } else {
            0.0
        };
        Response {
            r,
            reflectance: r.norm_sqr(),
            transmittance,
        }
    }

    pub fn transmission(&self, omega: f64) -> f64 {
        self.response(omega).transmittance
    }
}

/// cos φ and sin φ for complex φ. When the imaginary part is large both are
/// divided by e^{|Im φ|} and the factor is added to `log_scale`.
fn scaled_cos_sin(phi: Complex64, log_scale: &mut f64) -> (Complex64, Complex64) {
    let y = phi.im;
    if y.abs() < 20.0 {
        return (phi.cos(), phi.sin());
    }
    let e = (-2.0 * y.abs()).exp();
    let ch = 0.5 * (1.0 + e);
    let sh = 0.5 * (1.0 - e) * y.signum();
    let (sx, cx) = phi.re.sin_cos();
    *log_scale += y.abs();
    (Complex64::new(cx * ch, -sx * sh), Complex64::new(sx * ch, cx * sh))
}

/// Energy transmission coefficient of `stack` for one polarization.
pub fn transmission(
    stack: &LayerStack,
    omega: f64,
    theta0: f64,
    pol: Polarization,
) -> Result<f64, AcousticsError> {
    Ok(stack.branch(pol)?.transmission(omega, theta0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Periodic,
    ExponentialGraded,
}

/// Bilayer-stack family: bilayer `k` has thicknesses `d0_a·r^k`, `d0_b·r^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackGeometrySpec {
    pub kind: GeometryKind,
    pub n_bilayers: usize,
    /// m
    pub d0_a: f64,
    /// m
    pub d0_b: f64,
    pub ratio: f64,
    pub material_a: Material,
    pub material_b: Material,
}

impl StackGeometrySpec {
    pub fn periodic(a: Material, b: Material, n_bilayers: usize, d_a: f64, d_b: f64) -> Self {
        StackGeometrySpec {
            kind: GeometryKind::Periodic,
            n_bilayers,
            d0_a: d_a,
            d0_b: d_b,
            ratio: 1.0,
            material_a: a,
            material_b: b,
        }
    }

    pub fn graded(
        a: Material,
        b: Material,
        n_bilayers: usize,
        d0_a: f64,
        d0_b: f64,
        ratio: f64,
    ) -> Self {
        StackGeometrySpec {
            kind: GeometryKind::ExponentialGraded,
            n_bilayers,
            d0_a,
            d0_b,
            ratio,
            material_a: a,
            material_b: b,
        }
    }

    pub fn validate(&self) -> Result<(), AcousticsError> {
        let bad = |s: &str| Err(AcousticsError::BadGeometry(s.to_string()));
        if self.n_bilayers == 0 {
            return bad("n_bilayers must be at least 1");
        }
        if !(self.d0_a > 0.0 && self.d0_b > 0.0) || !self.d0_a.is_finite() || !self.d0_b.is_finite()
        {
            return bad("first-bilayer thicknesses must be positive");
        }
        if !(self.ratio >= 1.0 && self.ratio.is_finite()) {
            return bad("ratio must be >= 1");
        }
        if self.kind == GeometryKind::Periodic && self.ratio != 1.0 {
            return bad("periodic stacks have ratio 1");
        }
        self.material_a.validate()?;
        self.material_b.validate()?;
        Ok(())
    }

    /// Σ_k r^k over the bilayers.
    fn growth_sum(&self) -> f64 {
        (0..self.n_bilayers).map(|k| self.ratio.powi(k as i32)).sum()
    }

    pub fn total_thickness(&self) -> f64 {
        (self.d0_a + self.d0_b) * self.growth_sum()
    }

    /// Thickness of every layer in stack order.
    pub fn thicknesses(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.n_bilayers);
        let mut g = 1.0;
        for _ in 0..self.n_bilayers {
            out.push(self.d0_a * g);
            out.push(self.d0_b * g);
            g *= self.ratio;
        }
        out
    }
}

/// Expands a geometry into a stack between the given substrates.
pub fn generate_stack(
    spec: &StackGeometrySpec,
    hot_substrate: &Material,
    cold_substrate: &Material,
) -> Result<LayerStack, AcousticsError> {
    spec.validate()?;
    let layers = spec
        .thicknesses()
        .into_iter()
        .enumerate()
        .map(|(i, thickness)| Layer {
            material: if i % 2 == 0 {
                spec.material_a.clone()
            } else {
                spec.material_b.clone()
            },
            thickness,
        })
        .collect();
    LayerStack::new(hot_substrate.clone(), layers, cold_substrate.clone())
}

/// Scales both first-bilayer thicknesses by a common factor so that the
/// generated stack is `target` thick.
pub fn fit_total_thickness(
    spec: &StackGeometrySpec,
    target: f64,
) -> Result<StackGeometrySpec, AcousticsError> {
    spec.validate()?;
    if !(target > 0.0 && target.is_finite()) {
        return Err(AcousticsError::BadGeometry(
            "target thickness must be positive".into(),
        ));
    }
    let scale = target / spec.total_thickness();
    let mut out = spec.clone();
    out.d0_a *= scale;
    out.d0_b *= scale;
    Ok(out)
}

/// On-disk stack description. Thicknesses in nm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackConfig {
    #[serde(default = "crate::io::schema_v1")]
    pub schema: u32,
    #[serde(default)]
    pub stack_id: Option<String>,
    pub hot_substrate: String,
    pub cold_substrate: String,
    pub kind: GeometryKind,
    pub n_bilayers: usize,
    pub d0_a_nm: f64,
    pub d0_b_nm: f64,
    #[serde(default = "one")]
    pub ratio: f64,
    pub materials: [String; 2],
    /// When set, d0 values are rescaled to hit this total thickness.
    #[serde(default)]
    pub total_thickness_nm: Option<f64>,
    #[serde(default)]
    pub jitter_sigma_nm: Option<f64>,
    #[serde(default)]
    pub jitter_seed: Option<u64>,
}

fn one() -> f64 {
    1.0
}

impl StackConfig {
    pub fn geometry(&self, registry: &MaterialRegistry) -> Result<StackGeometrySpec, AcousticsError> {
        let spec = StackGeometrySpec {
            kind: self.kind,
            n_bilayers: self.n_bilayers,
            d0_a: self.d0_a_nm * 1e-9,
            d0_b: self.d0_b_nm * 1e-9,
            ratio: self.ratio,
            material_a: registry.get(&self.materials[0])?.clone(),
            material_b: registry.get(&self.materials[1])?.clone(),
        };
        match self.total_thickness_nm {
            Some(l) => fit_total_thickness(&spec, l * 1e-9),
            None => {
                spec.validate()?;
                Ok(spec)
            }
        }
    }

    pub fn build(&self, registry: &MaterialRegistry) -> Result<LayerStack, AcousticsError> {
        if self.schema != 1 {
            return Err(AcousticsError::BadGeometry(format!(
                "unsupported schema {}",
                self.schema
            )));
        }
        let spec = self.geometry(registry)?;
        let stack = generate_stack(
            &spec,
            registry.get(&self.hot_substrate)?,
            registry.get(&self.cold_substrate)?,
        )?;
        match self.jitter_sigma_nm {
            Some(s) if s > 0.0 => stack.jittered(s * 1e-9, self.jitter_seed.unwrap_or(0)),
            _ => Ok(stack),
        }
    }
}
