//! Attenuation, thermal occupancy and per-component scattering matrices.
//!
//! Port ordering is fixed: transducers are `[a_ext, a_int, b_ext, b_int]`,
//! cables are `[end1, end2, loss1, loss2]`. All inputs are SI; rates are
//! angular (rad/s).

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{LinkError, Result};
use crate::scalar::{cis, cplx, lit, Real};
use crate::units::{PLANCK_OVER_BOLTZMANN, SPEED_OF_LIGHT};

/// Internal quality factor of the cable's standing modes.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QiModel<T> {
    Constant(T),
    /// `(frequency_hz, Q_i)` samples, sorted by frequency. Linear interpolation
    /// inside the table, clamped to the end values outside it.
    Table(Vec<(T, T)>),
}

impl<T: Real> QiModel<T> {
    pub fn at(&self, f: T) -> T {
        match self {
            QiModel::Constant(q) => *q,
            QiModel::Table(rows) => {
                let first = rows[0];
                let last = rows[rows.len() - 1];
                if f <= first.0 {
                    return first.1;
                }
                if f >= last.0 {
                    return last.1;
                }
                let k = rows.partition_point(|r| r.0 <= f);
                let (f0, q0) = rows[k - 1];
                let (f1, q1) = rows[k];
                q0 + (q1 - q0) * (f - f0) / (f1 - f0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            QiModel::Constant(q) if *q > T::zero() => Ok(()),
            QiModel::Constant(_) => Err(LinkError::InvalidSpec("cable Q_i must be positive".into())),
            QiModel::Table(rows) => {
                if rows.is_empty() {
                    return Err(LinkError::InvalidSpec("empty Q_i table".into()));
                }
                if rows.iter().any(|r| !(r.1 > T::zero()) || !(r.0 >= T::zero())) {
                    return Err(LinkError::InvalidSpec("Q_i table entries must be positive".into()));
                }
                if rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(LinkError::InvalidSpec("Q_i table must be strictly increasing in frequency".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CableSpec<T> {
    pub qi: QiModel<T>,
    /// Meters.
    pub length: T,
    pub epsilon_r: T,
    /// Kelvin.
    pub temperature: T,
}

impl<T: Real> CableSpec<T> {
    pub fn new(qi: T, length: T, epsilon_r: T, temperature: T) -> Self {
        Self { qi: QiModel::Constant(qi), length, epsilon_r, temperature }
    }

    pub fn validate(&self) -> Result<()> {
        self.qi.validate()?;
        if !(self.length > T::zero()) {
            return Err(LinkError::InvalidSpec("cable length must be positive".into()));
        }
        if !(self.epsilon_r >= T::one()) {
            return Err(LinkError::InvalidSpec("relative permittivity must be at least 1".into()));
        }
        if !(self.temperature >= T::zero()) {
            return Err(LinkError::InvalidSpec("cable temperature must be non-negative".into()));
        }
        Ok(())
    }

    /// Power transmission `η_c = e^{−2αL}`.
    pub fn efficiency(&self, f: T) -> T {
        (-lit::<T>(2.0) * attenuation_constant(f, self) * self.length).exp()
    }

    /// Propagation phase `βL` with `β = 2πf√ε_r/c`.
    pub fn phase(&self, f: T) -> T {
        T::two_pi() * f * self.epsilon_r.sqrt() / lit::<T>(SPEED_OF_LIGHT) * self.length
    }

    pub fn bath(&self) -> Bath<T> {
        Bath::thermal(self.temperature)
    }
}

/// Field attenuation constant `α = π√ε_r·f / (Q_i(f)·c)` in 1/m.
pub fn attenuation_constant<T: Real>(f: T, cable: &CableSpec<T>) -> T {
    T::pi() * cable.epsilon_r.sqrt() * f / (cable.qi.at(f) * lit::<T>(SPEED_OF_LIGHT))
}

/// Power attenuation in dB/km for a field attenuation constant in 1/m.
pub fn attenuation_db_per_km<T: Real>(alpha: T) -> T {
    lit::<T>(2.0 * 1000.0 * 10.0) * T::LOG10_E() * alpha
}

/// Bose-Einstein occupancy `1/(e^{hf/kT} − 1)`; zero at `T = 0`.
pub fn thermal_occupation<T: Real>(f: T, temperature: T) -> Result<T> {
    if !(f > T::zero()) {
        return Err(LinkError::Domain(format!(
            "thermal occupation needs f > 0, got {:e} Hz",
            crate::scalar::to_f64(f)
        )));
    }
    if !(temperature > T::zero()) {
        return Ok(T::zero());
    }
    let x = lit::<T>(PLANCK_OVER_BOLTZMANN) * f / temperature;
    Ok(T::one() / x.exp_m1())
}

/// High-temperature occupancy `kT/(hf)`, equivalently `kTλ/(ch)` with the vacuum wavelength.
pub fn high_temperature_occupation<T: Real>(f: T, temperature: T) -> T {
    temperature / (lit::<T>(PLANCK_OVER_BOLTZMANN) * f)
}

/// Photon-jump estimate `p_e = αL(4n̄ + 1)`. Diagnostic only.
pub fn photon_jump_probability<T: Real>(alpha: T, length: T, occupation: T) -> T {
    alpha * length * (lit::<T>(4.0) * occupation + T::one())
}

/// Bath attached to an input port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bath<T> {
    /// Kelvin.
    pub temperature: T,
    /// Forces zero occupancy regardless of temperature.
    pub vacuum: bool,
}

impl<T: Real> Bath<T> {
    pub fn vacuum() -> Self {
        Self { temperature: T::zero(), vacuum: true }
    }

    pub fn thermal(temperature: T) -> Self {
        Self { temperature, vacuum: false }
    }

    /// Mean photon number injected at absolute frequency `f` (Hz).
    pub fn occupation(&self, f: T) -> Result<T> {
        if self.vacuum {
            return Ok(T::zero());
        }
        thermal_occupation(f, self.temperature)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortDescriptor<T> {
    pub label: String,
    pub bath: Bath<T>,
    /// Absolute frequency (Hz) of the field at this port.
    pub reference_hz: T,
}

/// Scattering matrix of one component at one frequency, with port metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentS<T: Real> {
    pub ports: Vec<PortDescriptor<T>>,
    /// `matrix[(out, in)]`.
    pub matrix: DMatrix<Complex<T>>,
}

impl<T: Real> ComponentS<T> {
    pub fn new(ports: Vec<PortDescriptor<T>>, matrix: DMatrix<Complex<T>>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != ports.len() {
            return Err(LinkError::InvalidSpec(format!(
                "{}x{} scattering matrix for {} ports",
                matrix.nrows(),
                matrix.ncols(),
                ports.len()
            )));
        }
        Ok(Self { ports, matrix })
    }

    pub fn port_count(&self) -> usize {
        self.ports.len()
    }

    pub fn port_index(&self, label: &str) -> Option<usize> {
        self.ports.iter().position(|p| p.label == label)
    }

    pub fn require_port(&self, label: &str) -> Result<usize> {
        self.port_index(label).ok_or_else(|| LinkError::UnknownPort(label.to_owned()))
    }

    /// `S[out ← in]` by label.
    pub fn element(&self, out: &str, input: &str) -> Result<Complex<T>> {
        Ok(self.matrix[(self.require_port(out)?, self.require_port(input)?)])
    }

    /// Prefixes every port label with `prefix.`.
    pub fn with_prefix(mut self, prefix: &str) -> Self {
        for p in &mut self.ports {
            p.label = format!("{prefix}.{}", p.label);
        }
        self
    }

    pub fn max_singular_value(&self) -> T {
        self.matrix
            .clone()
            .singular_values()
            .iter()
            .fold(T::zero(), |m, &s| m.max(s))
    }

    pub fn is_passive(&self, tolerance: T) -> bool {
        self.max_singular_value() <= T::one() + tolerance
    }

    /// Largest entry of `|S†S − I|`.
    pub fn unitarity_error(&self) -> T {
        let n = self.port_count();
        let prod = self.matrix.adjoint() * &self.matrix;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((prod[(i, j)] - cplx(target, T::zero())).norm_sqr().sqrt());
            }
        }
        worst
    }

    /// Largest entry of `|S − Sᵀ|`.
    pub fn symmetry_error(&self) -> T {
        let n = self.port_count();
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).norm_sqr().sqrt());
            }
        }
        worst
    }
}

/// The cable's zero-reflection four-port beamsplitter for a given power
/// transmission and propagation phase.
pub fn lossy_beamsplitter<T: Real>(efficiency: T, phase: T, bath: Bath<T>, reference_hz: T) -> ComponentS<T> {
    let z = Complex::new(T::zero(), T::zero());
    let t = cis(phase) * efficiency.sqrt();
    let r = cplx((T::one() - efficiency).max(T::zero()).sqrt(), T::zero());
    // loss-to-loss path carries the conjugate phase so the columns stay orthogonal
    let u = -t.conj();
    #[rustfmt::skip]
    let matrix = DMatrix::from_row_slice(4, 4, &[
        z, t, z, r,
        t, z, r, z,
        z, r, z, u,
        r, z, u, z,
    ]);
    let ports = ["end1", "end2", "loss1", "loss2"]
        .into_iter()
        .map(|label| PortDescriptor { label: label.into(), bath, reference_hz })
        .collect();
    ComponentS { ports, matrix }
}

/// Four-port cable scattering matrix at absolute frequency `f` (Hz).
pub fn cable_smatrix<T: Real>(f: T, cable: &CableSpec<T>) -> Result<ComponentS<T>> {
    if !(f > T::zero()) {
        return Err(LinkError::Domain("cable scattering needs f > 0".into()));
    }
    Ok(lossy_beamsplitter(cable.efficiency(f), cable.phase(f), cable.bath(), f))
}

/// Linearized two-mode converter with a beam-splitter coupling.
///
/// Rates are angular. The conversion rate `g` is taken real and non-negative;
/// the pump phase is absorbed into the port reference planes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransducerSpec<T> {
    pub omega_a: T,
    pub omega_b: T,
    pub kappa_a_ext: T,
    pub kappa_b_ext: T,
    pub kappa_a_int: T,
    pub kappa_b_int: T,
    pub g: T,
    /// Kelvin, shared by the intrinsic baths.
    pub temperature: T,
    /// Treat the b-mode intrinsic bath as vacuum regardless of temperature.
    pub b_intrinsic_vacuum: bool,
}

impl<T: Real> TransducerSpec<T> {
    /// Maximally flat converter: `κ_a^e = κ_b^e = 2g`.
    pub fn maximally_flat(omega_a: T, omega_b: T, g: T, kappa_a_int: T, kappa_b_int: T, temperature: T) -> Self {
        let two = lit::<T>(2.0);
        Self {
            omega_a,
            omega_b,
            kappa_a_ext: two * g,
            kappa_b_ext: two * g,
            kappa_a_int,
            kappa_b_int,
            g,
            temperature,
            b_intrinsic_vacuum: true,
        }
    }

    pub fn kappa_a(&self) -> T {
        self.kappa_a_ext + self.kappa_a_int
    }

    pub fn kappa_b(&self) -> T {
        self.kappa_b_ext + self.kappa_b_int
    }

    /// `C = 4g²/(κ_a κ_b)`.
    pub fn cooperativity(&self) -> T {
        lit::<T>(4.0) * self.g * self.g / (self.kappa_a() * self.kappa_b())
    }

    /// Checks the hard invariants and returns soft-limit warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let rates = [
            ("kappa_a_ext", self.kappa_a_ext),
            ("kappa_b_ext", self.kappa_b_ext),
            ("kappa_a_int", self.kappa_a_int),
            ("kappa_b_int", self.kappa_b_int),
            ("g", self.g),
            ("temperature", self.temperature),
        ];
        for (name, v) in rates {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(LinkError::InvalidSpec(format!("transducer {name} must be finite and non-negative")));
            }
        }
        if !(self.omega_a > T::zero()) || !(self.omega_b > T::zero()) {
            return Err(LinkError::InvalidSpec("transducer mode frequencies must be positive".into()));
        }
        if !(self.g < self.omega_a) {
            return Err(LinkError::InvalidSpec("conversion rate must stay below omega_a".into()));
        }
        let mut warnings = Vec::new();
        if self.g > self.omega_a / lit(5.0) {
            warnings.push("g exceeds omega_a/5; rotating-wave converter model is marginal".to_owned());
        }
        if self.omega_b <= self.omega_a {
            warnings.push("omega_b <= omega_a; converter treated as a generic two-mode beam splitter".to_owned());
        }
        Ok(warnings)
    }
}

/// Frequency response of the converter at offset `delta` (rad/s) from both
/// mode centers: `S(δ) = 1 − Kᵀ·M(δ)⁻¹·K` with drift matrix
/// `M = [[κ_a/2 − iδ, −ig], [−ig, κ_b/2 − iδ]]`.
pub fn transducer_smatrix<T: Real>(delta: T, spec: &TransducerSpec<T>) -> ComponentS<T> {
    let half = lit::<T>(0.5);
    let i = Complex::<T>::i();
    let g = cplx(spec.g, T::zero());
    let m00 = cplx(half * spec.kappa_a(), -delta);
    let m11 = cplx(half * spec.kappa_b(), -delta);
    let m01 = -i * g;
    let det = m00 * m11 - m01 * m01;
    // symmetric inverse
    let inv = [[m11 / det, -m01 / det], [-m01 / det, m00 / det]];
    let k = [
        (0usize, spec.kappa_a_ext.sqrt()),
        (0, spec.kappa_a_int.sqrt()),
        (1, spec.kappa_b_ext.sqrt()),
        (1, spec.kappa_b_int.sqrt()),
    ];
    let matrix = DMatrix::from_fn(4, 4, |r, c| {
        let (mr, kr) = k[r];
        let (mc, kc) = k[c];
        let id = if r == c { T::one() } else { T::zero() };
        cplx(id, T::zero()) - inv[mr][mc] * (kr * kc)
    });
    let fa = (spec.omega_a + delta) / T::two_pi();
    let fb = (spec.omega_b + delta) / T::two_pi();
    let thermal = Bath::thermal(spec.temperature);
    let b_int = if spec.b_intrinsic_vacuum { Bath::vacuum() } else { thermal };
    let ports = vec![
        PortDescriptor { label: "a_ext".into(), bath: thermal, reference_hz: fa },
        PortDescriptor { label: "a_int".into(), bath: thermal, reference_hz: fa },
        PortDescriptor { label: "b_ext".into(), bath: Bath::vacuum(), reference_hz: fb },
        PortDescriptor { label: "b_int".into(), bath: b_int, reference_hz: fb },
    ];
    ComponentS { ports, matrix }
}

pub mod ports {
    pub const A_EXT: usize = 0;
    pub const A_INT: usize = 1;
    pub const B_EXT: usize = 2;
    pub const B_INT: usize = 3;
    pub const END1: usize = 0;
    pub const END2: usize = 1;
    pub const LOSS1: usize = 2;
    pub const LOSS2: usize = 3;
}
