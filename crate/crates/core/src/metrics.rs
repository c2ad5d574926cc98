//! Reduction of a link response to thermal-loss channel parameters.

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex;
use serde::Serialize;

use crate::error::{LinkError, Result};
use crate::network::{NetworkResponse, PortRole};
use crate::scalar::{lit, to_f64, Real};

/// How the pulse bandwidth parameter maps onto the Gaussian envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseWidth {
    /// `ψ ∝ exp(−δ²/(2·BW²))`: BW is the standard deviation of ψ itself.
    #[default]
    Amplitude,
    /// `ψ ∝ exp(−δ²/(4·BW²))`: BW is the standard deviation of |ψ|².
    Intensity,
}

/// Discretely normalized spectral amplitude on a response grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec<T> {
    pub amplitudes: Vec<Complex<T>>,
    /// rad/s
    pub bandwidth: T,
    /// rad/s offset from band center
    pub center: T,
    pub width: PulseWidth,
}

impl<T: Real> PulseSpec<T> {
    /// `|ψ[ω_j]|²`
    pub fn weights(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().fold(T::zero(), |s, a| s + a.norm_sqr())
    }

    /// Mean and variance of the `|ψ|²` distribution over `offsets`.
    pub fn moments(&self, offsets: &[T]) -> (T, T) {
        let w = self.weights();
        let total = w.iter().fold(T::zero(), |s, &x| s + x);
        let mean = w.iter().zip(offsets).fold(T::zero(), |s, (&x, &d)| s + x * d) / total;
        let var = w
            .iter()
            .zip(offsets)
            .fold(T::zero(), |s, (&x, &d)| s + x * (d - mean) * (d - mean))
            / total;
        (mean, var)
    }
}

/// Minimum grid reach on either side of the pulse center, in bandwidths.
pub const MIN_SPAN_BANDWIDTHS: f64 = 6.0;

pub fn gaussian_pulse<T: Real>(offsets: &[T], bandwidth: T, center: T) -> Result<PulseSpec<T>> {
    gaussian_pulse_with(offsets, bandwidth, center, PulseWidth::default())
}

pub fn gaussian_pulse_with<T: Real>(
    offsets: &[T],
    bandwidth: T,
    center: T,
    width: PulseWidth,
) -> Result<PulseSpec<T>> {
    if !(bandwidth > T::zero()) {
        return Err(LinkError::Domain("pulse bandwidth must be positive".into()));
    }
    let (lo, hi) = match (offsets.first(), offsets.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err(LinkError::Domain("empty frequency grid".into())),
    };
    let reach = (center - lo).min(hi - center) / bandwidth;
    if reach < lit(MIN_SPAN_BANDWIDTHS) {
        return Err(LinkError::InsufficientSpan { available: to_f64(reach), required: MIN_SPAN_BANDWIDTHS });
    }
    let denom = match width {
        PulseWidth::Amplitude => lit::<T>(2.0) * bandwidth * bandwidth,
        PulseWidth::Intensity => lit::<T>(4.0) * bandwidth * bandwidth,
    };
    let raw: Vec<T> = offsets
        .iter()
        .map(|&d| (-(d - center) * (d - center) / denom).exp())
        .collect();
    let norm = raw.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
    let amplitudes = raw.into_iter().map(|x| Complex::new(x / norm, T::zero())).collect();
    Ok(PulseSpec { amplitudes, bandwidth, center, width })
}

fn check_grid<T: Real>(resp: &NetworkResponse<T>, pulse: &PulseSpec<T>) -> Result<()> {
    if resp.rows.len() != pulse.amplitudes.len() {
        return Err(LinkError::GridMismatch(format!(
            "pulse has {} samples, response has {}",
            pulse.amplitudes.len(),
            resp.rows.len()
        )));
    }
    Ok(())
}

/// `η = Σ_j |S_21[ω_j]|²·|ψ[ω_j]|²`
pub fn pulse_efficiency<T: Real>(resp: &NetworkResponse<T>, pulse: &PulseSpec<T>) -> Result<T> {
    check_grid(resp, pulse)?;
    let s = resp.signal_index()?;
    Ok(resp
        .rows
        .iter()
        .zip(&pulse.amplitudes)
        .fold(T::zero(), |acc, (row, p)| acc + row[s].norm_sqr() * p.norm_sqr()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AddedNoise<T> {
    /// `(port label, n_added,i)` in port order.
    pub per_port: Vec<(String, T)>,
    pub total: T,
}

/// `n_added,i = Σ_j |S_2i[ω_j]|²·|ψ[ω_j]|²·n̄_i(ω_j)` for every noise port.
pub fn added_noise<T: Real>(resp: &NetworkResponse<T>, pulse: &PulseSpec<T>) -> Result<AddedNoise<T>> {
    check_grid(resp, pulse)?;
    let weights = pulse.weights();
    let mut per_port = Vec::new();
    for (i, port) in resp.ports.iter().enumerate() {
        if port.role != PortRole::Noise {
            continue;
        }
        let mut n = T::zero();
        for (j, row) in resp.rows.iter().enumerate() {
            let occ = resp.occupation(i, j)?;
            if occ > T::zero() {
                n += row[i].norm_sqr() * weights[j] * occ;
            }
        }
        per_port.push((port.label.clone(), n));
    }
    let total = per_port.iter().fold(T::zero(), |s, (_, n)| s + *n);
    Ok(AddedNoise { per_port, total })
}

/// `n_th = n_added / (1 − η)`.
pub fn effective_thermal<T: Real>(efficiency: T, n_added: T) -> Result<T> {
    if n_added == T::zero() {
        return Ok(T::zero());
    }
    let loss = T::one() - efficiency;
    if !(loss > T::zero()) {
        return Err(LinkError::InconsistentChannel(format!(
            "efficiency {} leaves no room for {} added photons",
            to_f64(efficiency),
            to_f64(n_added)
        )));
    }
    Ok(n_added / loss)
}

/// `⟨1|ρ_out|1⟩` for a thermal attenuator (transmissivity `η`, environment mean
/// `n_th`) acting on `|1⟩`.
///
/// With `ν = (1 − η)·n_th` the output is `τ_ν + η·∂τ_ν/∂ν` for thermal states
/// `τ_ν`, which gives `F = ν/(1+ν)² + η(1 − ν)/(1+ν)³`.
pub fn single_photon_fidelity<T: Real>(efficiency: T, n_th: T) -> T {
    let one = T::one();
    let nu = (one - efficiency) * n_th;
    let p = one + nu;
    nu / (p * p) + efficiency * (one - nu) / (p * p * p)
}

/// Tail mass allowed outside the truncated environment.
pub const FOCK_TAIL: f64 = 1e-12;

/// Smallest `m*` whose thermal tail `Σ_{m>m*} n^m/(1+n)^{m+1}` is below [`FOCK_TAIL`].
pub fn environment_cutoff<T: Real>(n_th: T) -> usize {
    if !(n_th > T::zero()) {
        return 0;
    }
    // tail beyond m* is (n/(1+n))^{m*+1}
    let ratio = to_f64(n_th / (T::one() + n_th));
    let m = (FOCK_TAIL.ln() / ratio.ln()).ceil() as i64 - 1;
    let mut m = m.max(0) as usize;
    while ratio.powi(m as i32 + 1) >= FOCK_TAIL {
        m += 1;
    }
    m
}

/// Output photon-number distribution of the thermal attenuator on `|1⟩`,
/// computed in a truncated two-mode Fock space.
///
/// The environment is a Bose-Einstein mixture cut at [`environment_cutoff`]; the
/// system space is cut at `m* + 2`. The beamsplitter `exp(θ(a†b − ab†))`,
/// `cos θ = √η`, conserves total photon number, so it is exponentiated per
/// number block. Returns `P(n)` for `n = 0..=m*+1` after tracing out the
/// environment.
pub fn thermal_attenuator_fock<T: Real>(efficiency: T, n_th: T) -> Vec<T> {
    let m_star = environment_cutoff(n_th);
    let sys_dim = m_star + 2;
    let theta = efficiency.max(T::zero()).min(T::one()).sqrt().acos();
    let mut out = vec![T::zero(); sys_dim];
    let one = T::one();
    for m in 0..=m_star {
        let p_m = if n_th > T::zero() {
            (n_th / (one + n_th)).powi(m as i32) / (one + n_th)
        } else if m == 0 {
            one
        } else {
            T::zero()
        };
        // block with N = m + 1 photons, basis |s, N − s⟩ for s = 0..=N
        let total = m + 1;
        let dim = total + 1;
        let mut gen = DMatrix::<T>::zeros(dim, dim);
        for s in 0..total {
            // a†b maps |s, N−s⟩ → √(s+1)√(N−s) |s+1, N−s−1⟩
            let amp = (lit::<T>((s + 1) as f64) * lit::<T>((total - s) as f64)).sqrt() * theta;
            gen[(s + 1, s)] = amp;
            gen[(s, s + 1)] = -amp;
        }
        let u = gen.exp();
        // input |1, m⟩ is basis index s = 1
        for s in 0..dim.min(sys_dim) {
            let a = u[(s, 1)];
            out[s] += p_m * a * a;
        }
    }
    out
}

/// Brute-force counterpart of [`single_photon_fidelity`].
pub fn single_photon_fidelity_fock<T: Real>(efficiency: T, n_th: T) -> T {
    thermal_attenuator_fock(efficiency, n_th)[1]
}

/// Floor on `1 − η[ω]` in the capacity integrands.
pub const CAPACITY_LOSS_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityBounds<T> {
    /// qubits/s
    pub lower: T,
    pub upper: T,
    /// Divided by `g` in rad/s.
    pub lower_per_g: T,
    pub upper_per_g: T,
    /// Divided by `g/2π` in Hz.
    pub lower_per_g_hz: T,
    pub upper_per_g_hz: T,
    /// Grid points where the printed lower bound exceeds the upper bound.
    pub inverted_points: usize,
    /// `1 − η` was clamped somewhere on the grid.
    pub clamped: bool,
}

/// Integral of `max(log₂ a(ω), 0)·dω/2π` over a uniform grid with trapezoids,
/// splitting the cells where `a` crosses 1 at the linearly interpolated root.
fn integrate_log_positive<T: Real>(args: &[T], spacing: T) -> T {
    let one = T::one();
    let half = lit::<T>(0.5);
    let q = |a: T| if a > one { a.log2() } else { T::zero() };
    let mut sum = T::zero();
    for w in args.windows(2) {
        let (a0, a1) = (w[0], w[1]);
        let (q0, q1) = (q(a0), q(a1));
        let above0 = a0 > one;
        let above1 = a1 > one;
        if above0 == above1 {
            sum += half * (q0 + q1) * spacing;
        } else {
            // fraction of the cell on the positive side
            let t = (one - a0) / (a1 - a0);
            let frac = if above0 { t } else { one - t };
            sum += half * (q0 + q1) * frac * spacing;
        }
    }
    sum / T::two_pi()
}

/// Lower and upper bounds on the continuous-time thermal-loss capacity.
///
/// Per grid point `η = |S_21|²` and the effective occupancy
/// `n̄ = Σ_noise |S_2i|²·n̄_i / (1 − η)`;
/// `q_L = max{log₂(η/(1−η)), 0}` and
/// `q_U = max{log₂[(η − (1−η)n̄) / ((1−η)(n̄+1))], 0}`.
pub fn capacity_bounds<T: Real>(resp: &NetworkResponse<T>, g: T) -> Result<CapacityBounds<T>> {
    let signal = resp.signal_index()?;
    let floor = lit::<T>(CAPACITY_LOSS_FLOOR);
    let mut lower_args = Vec::with_capacity(resp.rows.len());
    let mut upper_args = Vec::with_capacity(resp.rows.len());
    let mut clamped = false;
    let mut inverted = 0;
    for (j, row) in resp.rows.iter().enumerate() {
        let eta = row[signal].norm_sqr().min(T::one());
        let mut loss = T::one() - eta;
        if loss < floor {
            loss = floor;
            clamped = true;
        }
        let mut noise = T::zero();
        for (i, port) in resp.ports.iter().enumerate() {
            if port.role == PortRole::Noise {
                let occ = resp.occupation(i, j)?;
                if occ > T::zero() {
                    noise += row[i].norm_sqr() * occ;
                }
            }
        }
        let nbar = noise / loss;
        let a_lower = eta / loss;
        let num = eta - loss * nbar;
        let a_upper = if num > T::zero() { num / (loss * (nbar + T::one())) } else { T::zero() };
        if a_lower.max(T::one()).log2() > a_upper.max(T::one()).log2() {
            inverted += 1;
        }
        lower_args.push(a_lower);
        upper_args.push(a_upper);
    }
    if clamped {
        warn!("perfect transmission on the grid: clamped 1 - eta to {CAPACITY_LOSS_FLOOR:e}; capacity diverges");
    }
    let dw = resp.grid.spacing();
    let lower = integrate_log_positive(&lower_args, dw);
    let upper = integrate_log_positive(&upper_args, dw);
    let g_hz = g / T::two_pi();
    Ok(CapacityBounds {
        lower,
        upper,
        lower_per_g: lower / g,
        upper_per_g: upper / g,
        lower_per_g_hz: lower / g_hz,
        upper_per_g_hz: upper / g_hz,
        inverted_points: inverted,
        clamped,
    })
}

/// Channel figures of merit for one link and pulse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSummary {
    pub eta: f64,
    pub n_added_per_port: Vec<(String, f64)>,
    pub n_added_total: f64,
    pub n_th: f64,
    pub fidelity: f64,
    pub qcap_lower_qubits_s: f64,
    pub qcap_upper_qubits_s: f64,
    pub qcap_lower_per_g: f64,
    pub qcap_upper_per_g: f64,
    pub qcap_lower_per_g_hz: f64,
    pub qcap_upper_per_g_hz: f64,
    pub capacity_inverted_points: usize,
}

impl ChannelSummary {
    pub const CSV_HEADER: [&'static str; 8] = [
        "eta",
        "n_added_total",
        "n_th",
        "fidelity",
        "qcap_lower_per_g",
        "qcap_upper_per_g",
        "qcap_lower_qubits_s",
        "qcap_upper_qubits_s",
    ];

    pub fn csv_record(&self) -> [String; 8] {
        use crate::report::sci;
        [
            sci(self.eta),
            sci(self.n_added_total),
            sci(self.n_th),
            sci(self.fidelity),
            sci(self.qcap_lower_per_g),
            sci(self.qcap_upper_per_g),
            sci(self.qcap_lower_qubits_s),
            sci(self.qcap_upper_qubits_s),
        ]
    }

    /// Range checks applied before anything is serialized.
    pub fn check_ranges(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(LinkError::InconsistentChannel(format!("{name} = {x} outside [0, 1]")))
            }
        };
        unit("eta", self.eta)?;
        unit("fidelity", self.fidelity)?;
        if !(self.n_added_total >= 0.0) || self.n_added_per_port.iter().any(|(_, n)| !(*n >= 0.0)) {
            return Err(LinkError::InconsistentChannel("negative added noise".into()));
        }
        Ok(())
    }
}

/// Runs every reduction for one response.
pub fn summarize<T: Real>(resp: &NetworkResponse<T>, pulse: &PulseSpec<T>, g: T) -> Result<ChannelSummary> {
    let eta = pulse_efficiency(resp, pulse)?;
    let noise = added_noise(resp, pulse)?;
    let n_th = effective_thermal(eta, noise.total)?;
    let fidelity = single_photon_fidelity(eta, n_th);
    let cap = capacity_bounds(resp, g)?;
    let summary = ChannelSummary {
        eta: to_f64(eta),
        n_added_per_port: noise.per_port.iter().map(|(l, n)| (l.clone(), to_f64(*n))).collect(),
        n_added_total: to_f64(noise.total),
        n_th: to_f64(n_th),
        fidelity: to_f64(fidelity),
        qcap_lower_qubits_s: to_f64(cap.lower),
        qcap_upper_qubits_s: to_f64(cap.upper),
        qcap_lower_per_g: to_f64(cap.lower_per_g),
        qcap_upper_per_g: to_f64(cap.upper_per_g),
        qcap_lower_per_g_hz: to_f64(cap.lower_per_g_hz),
        qcap_upper_per_g_hz: to_f64(cap.upper_per_g_hz),
        capacity_inverted_points: cap.inverted_points,
    };
    summary.check_ranges()?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Band, FrequencyGrid, InputPort, SolverMode};
    use crate::physics::Bath;

    fn constant_response(s21: Complex<f64>, noise: Complex<f64>, temperature: f64) -> NetworkResponse<f64> {
        let grid = FrequencyGrid::new(401, 10.0, 2.0 * std::f64::consts::PI * 2e8, 3e10).unwrap();
        let ports = vec![
            InputPort { label: "sig".into(), role: PortRole::Signal, bath: None, band: Band::B },
            InputPort { label: "n".into(), role: PortRole::Noise, bath: Some(Bath::thermal(temperature)), band: Band::A },
        ];
        let rows = vec![vec![s21, noise]; grid.len()];
        NetworkResponse { grid, ports, rows, mode: SolverMode::SinglePass, warnings: vec![] }
    }

    #[test]
    fn pulse_normalized_and_sized() {
        let grid = FrequencyGrid::<f64>::new(4097, 8.0, 1.0, 2.0).unwrap();
        let p = gaussian_pulse_with(grid.offsets(), 1.0, 0.0, PulseWidth::Intensity).unwrap();
        assert!((p.norm_sqr() - 1.0).abs() < 1e-12);
        let (mean, var) = p.moments(grid.offsets());
        assert!(mean.abs() < 1e-12);
        assert!((var.sqrt() - 1.0).abs() < 1e-9);
        let p = gaussian_pulse(grid.offsets(), 1.0, 0.0).unwrap();
        let (_, var) = p.moments(grid.offsets());
        assert!((var - 0.5).abs() < 1e-9);
    }

    #[test]
    fn pulse_span_precondition() {
        let grid = FrequencyGrid::new(101, 2.0, 1.0, 2.0).unwrap();
        assert!(matches!(
            gaussian_pulse(grid.offsets(), 1.0, 0.0),
            Err(LinkError::InsufficientSpan { .. })
        ));
        assert!(gaussian_pulse(grid.offsets(), 0.0, 0.0).is_err());
    }

    #[test]
    fn constant_transmission_efficiency() {
        let resp = constant_response(Complex::new(1.0, 0.0), Complex::new(0.0, 0.0), 0.0);
        let p = gaussian_pulse(resp.grid.offsets(), 1.0, 0.0).unwrap();
        assert!((pulse_efficiency(&resp, &p).unwrap() - 1.0).abs() < 1e-12);
        let resp = constant_response(Complex::new(0.3, 0.4), Complex::new(0.0, 0.0), 0.0);
        assert!((pulse_efficiency(&resp, &p).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let resp = constant_response(Complex::new(1.0, 0.0), Complex::new(0.0, 0.0), 0.0);
        let grid = FrequencyGrid::new(101, 10.0, 1.0, 2.0).unwrap();
        let p = gaussian_pulse(grid.offsets(), 1.0, 0.0).unwrap();
        assert!(matches!(pulse_efficiency(&resp, &p), Err(LinkError::GridMismatch(_))));
    }

    #[test]
    fn zero_temperature_adds_no_noise() {
        let resp = constant_response(Complex::new(0.9, 0.0), Complex::new(0.3, 0.0), 0.0);
        let p = gaussian_pulse(resp.grid.offsets(), 1.0, 0.0).unwrap();
        assert_eq!(added_noise(&resp, &p).unwrap().total, 0.0);
    }

    #[test]
    fn missing_bath_is_an_error() {
        let mut resp = constant_response(Complex::new(0.9, 0.0), Complex::new(0.3, 0.0), 0.1);
        resp.ports[1].bath = None;
        let p = gaussian_pulse(resp.grid.offsets(), 1.0, 0.0).unwrap();
        assert!(matches!(added_noise(&resp, &p), Err(LinkError::MissingBath(_))));
    }

    #[test]
    fn effective_thermal_cases() {
        assert_eq!(effective_thermal(0.7, 0.0).unwrap(), 0.0);
        assert!((effective_thermal(0.5_f64, 0.25).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(effective_thermal(1.0, 0.0).unwrap(), 0.0);
        assert!(matches!(effective_thermal(1.0, 0.1), Err(LinkError::InconsistentChannel(_))));
        let n = effective_thermal(0.96_f64, 0.0036).unwrap();
        assert!((n - 0.09).abs() < 1e-12);
    }

    #[test]
    fn fidelity_limits() {
        assert_eq!(single_photon_fidelity(0.83, 0.0), 0.83);
        assert_eq!(single_photon_fidelity(1.0, 0.7), 1.0);
        assert!((single_photon_fidelity(0.9_f64, 0.1) - 0.8746).abs() < 5e-5);
        assert!((single_photon_fidelity_fock(0.9_f64, 0.1) - 0.8746).abs() < 5e-5);
    }

    #[test]
    fn fock_output_is_a_distribution() {
        let p = thermal_attenuator_fock(0.6, 1.3);
        let total: f64 = p.iter().sum();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
        assert!(p.iter().all(|&x| x >= -1e-15));
    }

    #[test]
    fn cutoff_meets_tail_bound() {
        for &n in &[0.01, 0.1, 1.0, 2.0] {
            let m = environment_cutoff(n);
            let r: f64 = n / (1.0 + n);
            assert!(r.powi(m as i32 + 1) < FOCK_TAIL);
            assert!(m == 0 || r.powi(m as i32) >= FOCK_TAIL);
        }
        assert_eq!(environment_cutoff(0.0), 0);
    }

    #[test]
    fn capacity_half_transmission_is_zero() {
        let resp = constant_response(Complex::new(0.5f64.sqrt(), 0.0), Complex::new(0.0, 0.0), 0.0);
        let c = capacity_bounds(&resp, 1.0).unwrap();
        assert!(c.lower.abs() < 1e-12);
        assert!(c.upper.abs() < 1e-12);
    }

    #[test]
    fn capacity_constant_channel_integrates_exactly() {
        // η = 0.8, no noise: q = log2(4) = 2 over a span of 20 rad/s
        let resp = constant_response(Complex::new(0.8f64.sqrt(), 0.0), Complex::new(0.0, 0.0), 0.0);
        let c = capacity_bounds(&resp, 2.0).unwrap();
        let expected = 2.0 * 20.0 / (2.0 * std::f64::consts::PI);
        assert!((c.lower - expected).abs() < 1e-12);
        assert!((c.upper - expected).abs() < 1e-12);
        assert!((c.lower_per_g - expected / 2.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_channel_is_clamped() {
        let resp = constant_response(Complex::new(1.0, 0.0), Complex::new(0.0, 0.0), 0.0);
        let c = capacity_bounds(&resp, 1.0).unwrap();
        assert!(c.clamped);
        assert!(c.lower.is_finite());
    }

    #[test]
    fn kink_integration_is_exact_for_linear_args() {
        // a(ω) = 1 + ω on [-1, 1]: positive part integral of log2(1+ω) on [0,1]
        let n = 2001;
        let args: Vec<f64> = (0..n).map(|j| 1.0 + (-1.0 + 2.0 * j as f64 / (n - 1) as f64)).collect();
        let got = integrate_log_positive(&args, 2.0 / (n - 1) as f64) * 2.0 * std::f64::consts::PI;
        let exact = (2.0 * 2f64.ln() - 1.0) / 2f64.ln();
        assert!((got - exact).abs() < 1e-6, "{got} {exact}");
    }
}
