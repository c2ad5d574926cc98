//! Assembly of transducer A → cable → transducer B into one response.
//!
//! Each grid point is an offset `δ` from both band centers: the signal enters
//! transducer A's b-port at `ω_b + δ`, crosses the cable at `ω_a + δ` and leaves
//! transducer B's b-port at `ω_b + δ`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::debug;
use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LinkError, Result};
use crate::physics::{
    cable_smatrix, ports, transducer_smatrix, Bath, CableSpec, ComponentS, PortDescriptor, TransducerSpec,
};
use crate::scalar::{lit, to_f64, Real};

/// Uniform, symmetric grid of angular-frequency offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid<T> {
    offsets: Vec<T>,
    spacing: T,
    /// Band centers in rad/s, used to place bath occupancies.
    pub omega_a: T,
    pub omega_b: T,
}

impl<T: Real> FrequencyGrid<T> {
    /// `points` samples spanning `[−half_span, half_span]` (rad/s).
    pub fn new(points: usize, half_span: T, omega_a: T, omega_b: T) -> Result<Self> {
        if points < 3 || points % 2 == 0 {
            return Err(LinkError::InvalidSpec(format!("grid needs an odd point count >= 3, got {points}")));
        }
        if !(half_span > T::zero()) {
            return Err(LinkError::InvalidSpec("grid span must be positive".into()));
        }
        let half = (points - 1) / 2;
        let spacing = half_span / lit::<T>(half as f64);
        let offsets = (0..points)
            .map(|j| lit::<T>(j as f64 - half as f64) * spacing)
            .collect();
        Ok(Self { offsets, spacing, omega_a, omega_b })
    }

    pub fn offsets(&self) -> &[T] {
        &self.offsets
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn half_span(&self) -> T {
        self.offsets[self.len() - 1]
    }

    /// Same span at half the spacing (`2N − 1` points).
    pub fn refined(&self) -> Self {
        Self::new(2 * self.len() - 1, self.half_span(), self.omega_a, self.omega_b)
            .expect("refining a valid grid")
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.len() == other.len()
            && (self.spacing - other.spacing).abs() <= lit::<T>(1e-12) * self.spacing.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    /// Exact linear network including reflections between the transducers.
    #[default]
    Full,
    /// Forward transmissions only, no reflection loops.
    SinglePass,
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverMode::Full => "full",
            SolverMode::SinglePass => "single-pass",
        })
    }
}

impl FromStr for SolverMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(SolverMode::Full),
            "single-pass" | "single_pass" => Ok(SolverMode::SinglePass),
            _ => Err(format!("unknown solver mode {s:?} (expected full or single-pass)")),
        }
    }
}

/// Order in which the two internal connections are eliminated in full mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EliminationOrder {
    /// One linear solve over all internal ports.
    #[default]
    Global,
    /// Join A with the cable, then the result with B.
    SourceFirst,
    /// Join the cable with B, then A with the result.
    SinkFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    /// Near `ω_a`.
    A,
    /// Near `ω_b`.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PortRole {
    Signal,
    Noise,
}

/// Input port of the assembled link as seen from the output.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPort<T> {
    pub label: String,
    pub role: PortRole,
    pub bath: Option<Bath<T>>,
    pub band: Band,
}

pub const OUTPUT_PORT: &str = "B.b_ext";
pub const SIGNAL_PORT: &str = "A.b_ext";

/// Rows `S_{2i}[ω_j]` of the assembled link: every input port to the output.
#[derive(Debug, Clone)]
pub struct NetworkResponse<T> {
    pub grid: FrequencyGrid<T>,
    pub ports: Vec<InputPort<T>>,
    /// `rows[j][i]` is the amplitude from input port `i` at grid point `j`.
    pub rows: Vec<Vec<Complex<T>>>,
    pub mode: SolverMode,
    pub warnings: Vec<String>,
}

impl<T: Real> NetworkResponse<T> {
    pub fn port_index(&self, label: &str) -> Option<usize> {
        self.ports.iter().position(|p| p.label == label)
    }

    pub fn signal_index(&self) -> Result<usize> {
        self.ports
            .iter()
            .position(|p| p.role == PortRole::Signal)
            .ok_or_else(|| LinkError::UnknownPort("signal".into()))
    }

    /// `|S_21[ω_j]|²` across the grid.
    pub fn efficiency_profile(&self) -> Result<Vec<T>> {
        let s = self.signal_index()?;
        Ok(self.rows.iter().map(|r| r[s].norm_sqr()).collect())
    }

    pub fn row_sum(&self, j: usize) -> T {
        self.rows[j].iter().fold(T::zero(), |acc, s| acc + s.norm_sqr())
    }

    /// Absolute frequency (Hz) of port `i` at grid point `j`.
    pub fn port_frequency(&self, i: usize, j: usize) -> T {
        let center = match self.ports[i].band {
            Band::A => self.grid.omega_a,
            Band::B => self.grid.omega_b,
        };
        (center + self.grid.offsets()[j]) / T::two_pi()
    }

    /// Bath occupancy entering port `i` at grid point `j`.
    pub fn occupation(&self, i: usize, j: usize) -> Result<T> {
        let port = &self.ports[i];
        let bath = port.bath.ok_or_else(|| LinkError::MissingBath(port.label.clone()))?;
        bath.occupation(self.port_frequency(i, j))
    }

    /// Copy with one input port dropped.
    pub fn without_port(&self, label: &str) -> Result<Self> {
        let i = self.port_index(label).ok_or_else(|| LinkError::UnknownPort(label.into()))?;
        let mut out = self.clone();
        out.ports.remove(i);
        for r in &mut out.rows {
            r.remove(i);
        }
        Ok(out)
    }

    /// Writes `delta_hz, port_label, re, im` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["delta_hz", "port_label", "re", "im"])?;
        for (j, row) in self.rows.iter().enumerate() {
            let d = crate::report::sci(to_f64(self.grid.offsets()[j] / T::two_pi()));
            for (port, s) in self.ports.iter().zip(row) {
                w.write_record([
                    d.as_str(),
                    port.label.as_str(),
                    &crate::report::sci(to_f64(s.re)),
                    &crate::report::sci(to_f64(s.im)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn block_diag<T: Real>(parts: &[&ComponentS<T>]) -> ComponentS<T> {
    let n: usize = parts.iter().map(|p| p.port_count()).sum();
    let mut matrix = DMatrix::zeros(n, n);
    let mut ports = Vec::with_capacity(n);
    let mut off = 0;
    for p in parts {
        let k = p.port_count();
        matrix.view_mut((off, off), (k, k)).copy_from(&p.matrix);
        ports.extend(p.ports.iter().cloned());
        off += k;
    }
    ComponentS { ports, matrix }
}

/// Joins ports `k` and `l` of one component, leaving `n − 2` ports.
pub fn innerconnect<T: Real>(s: &ComponentS<T>, k: usize, l: usize) -> Result<ComponentS<T>> {
    let n = s.port_count();
    if k >= n || l >= n || k == l {
        return Err(LinkError::InvalidSpec(format!("cannot join ports {k} and {l} of a {n}-port")));
    }
    let m = &s.matrix;
    let one = Complex::new(T::one(), T::zero());
    let akl = one - m[(k, l)];
    let alk = one - m[(l, k)];
    let det = akl * alk - m[(k, k)] * m[(l, l)];
    if det.norm_sqr() < lit(1e-28) {
        return Err(LinkError::SingularConnection(s.ports[k].label.clone(), s.ports[l].label.clone()));
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != k && i != l).collect();
    let matrix = DMatrix::from_fn(keep.len(), keep.len(), |r, c| {
        let (i, j) = (keep[r], keep[c]);
        m[(i, j)]
            + (m[(k, j)] * m[(i, l)] * alk
                + m[(l, j)] * m[(i, k)] * akl
                + m[(k, j)] * m[(l, l)] * m[(i, k)]
                + m[(l, j)] * m[(k, k)] * m[(i, l)])
                / det
    });
    let ports = keep.iter().map(|&i| s.ports[i].clone()).collect();
    Ok(ComponentS { ports, matrix })
}

/// Joins port `k` of `a` to port `l` of `b`.
pub fn connect<T: Real>(a: &ComponentS<T>, k: usize, b: &ComponentS<T>, l: usize) -> Result<ComponentS<T>> {
    innerconnect(&block_diag(&[a, b]), k, a.port_count() + l)
}

/// Eliminates every `(k, l)` pair of a block-diagonal component in one solve:
/// `S_ext = S_ee + S_ei·P·(I − S_ii·P)⁻¹·S_ie`, with `P` the pair permutation.
pub fn connect_all<T: Real>(s: &ComponentS<T>, pairs: &[(usize, usize)]) -> Result<ComponentS<T>> {
    let n = s.port_count();
    let internal: Vec<usize> = pairs.iter().flat_map(|&(k, l)| [k, l]).collect();
    let external: Vec<usize> = (0..n).filter(|i| !internal.contains(i)).collect();
    let ni = internal.len();
    let pos = |p: usize| internal.iter().position(|&q| q == p).expect("internal port");
    let mut perm = DMatrix::<Complex<T>>::zeros(ni, ni);
    for &(k, l) in pairs {
        perm[(pos(k), pos(l))] = Complex::new(T::one(), T::zero());
        perm[(pos(l), pos(k))] = Complex::new(T::one(), T::zero());
    }
    let pick = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |r, c| s.matrix[(rows[r], cols[c])]);
    let s_ee = pick(&external, &external);
    let s_ei = pick(&external, &internal);
    let s_ie = pick(&internal, &external);
    let s_ii = pick(&internal, &internal);
    let lhs = DMatrix::<Complex<T>>::identity(ni, ni) - &s_ii * &perm;
    let solved = lhs.lu().solve(&s_ie).ok_or_else(|| {
        LinkError::SingularConnection(s.ports[internal[0]].label.clone(), s.ports[internal[1]].label.clone())
    })?;
    let matrix = s_ee + s_ei * perm * solved;
    let ports = external.iter().map(|&i| s.ports[i].clone()).collect();
    Ok(ComponentS { ports, matrix })
}

/// Full linear network of A → cable → B at one offset, with qualified labels
/// (`A.*`, `cable.*`, `B.*`).
pub fn compose_link<T: Real>(
    a: &ComponentS<T>,
    cable: &ComponentS<T>,
    b: &ComponentS<T>,
    order: EliminationOrder,
) -> Result<ComponentS<T>> {
    let a = a.clone().with_prefix("A");
    let c = cable.clone().with_prefix("cable");
    let b = b.clone().with_prefix("B");
    match order {
        EliminationOrder::Global => {
            let all = block_diag(&[&a, &c, &b]);
            let na = a.port_count();
            let nc = c.port_count();
            connect_all(&all, &[(ports::A_EXT, na + ports::END1), (na + ports::END2, na + nc + ports::A_EXT)])
        }
        EliminationOrder::SourceFirst => {
            let ac = connect(&a, ports::A_EXT, &c, ports::END1)?;
            let end2 = ac.require_port("cable.end2")?;
            connect(&ac, end2, &b, ports::A_EXT)
        }
        EliminationOrder::SinkFirst => {
            let cb = connect(&c, ports::END2, &b, ports::A_EXT)?;
            let end1 = cb.require_port("cable.end1")?;
            connect(&a, ports::A_EXT, &cb, end1)
        }
    }
}

struct PortPlan {
    label: &'static str,
    role: PortRole,
    band: Band,
}

const LINK_INPUTS: [PortPlan; 8] = [
    PortPlan { label: SIGNAL_PORT, role: PortRole::Signal, band: Band::B },
    PortPlan { label: "A.a_int", role: PortRole::Noise, band: Band::A },
    PortPlan { label: "A.b_int", role: PortRole::Noise, band: Band::B },
    PortPlan { label: "cable.loss1", role: PortRole::Noise, band: Band::A },
    PortPlan { label: "cable.loss2", role: PortRole::Noise, band: Band::A },
    PortPlan { label: "B.a_int", role: PortRole::Noise, band: Band::A },
    PortPlan { label: "B.b_int", role: PortRole::Noise, band: Band::B },
    // vacuum arriving at the output port and reflected back out of it
    PortPlan { label: OUTPUT_PORT, role: PortRole::Noise, band: Band::B },
];

fn single_pass_row<T: Real>(a: &ComponentS<T>, c: &ComponentS<T>, b: &ComponentS<T>) -> Vec<Complex<T>> {
    use ports::*;
    let bm = &b.matrix;
    let forward_b = bm[(B_EXT, A_EXT)];
    let through = c.matrix[(END2, END1)] * forward_b;
    vec![
        through * a.matrix[(A_EXT, B_EXT)],
        through * a.matrix[(A_EXT, A_INT)],
        through * a.matrix[(A_EXT, B_INT)],
        c.matrix[(END2, LOSS1)] * forward_b,
        c.matrix[(END2, LOSS2)] * forward_b,
        bm[(B_EXT, A_INT)],
        bm[(B_EXT, B_INT)],
        bm[(B_EXT, B_EXT)],
    ]
}

fn full_row<T: Real>(
    a: &ComponentS<T>,
    c: &ComponentS<T>,
    b: &ComponentS<T>,
    order: EliminationOrder,
) -> Result<Vec<Complex<T>>> {
    let link = compose_link(a, c, b, order)?;
    let out = link.require_port(OUTPUT_PORT)?;
    LINK_INPUTS
        .iter()
        .map(|p| Ok(link.matrix[(out, link.require_port(p.label)?)]))
        .collect()
}

fn input_bath<T: Real>(label: &str, a: &ComponentS<T>, c: &ComponentS<T>, b: &ComponentS<T>) -> Bath<T> {
    let (comp, name) = label.split_once('.').expect("qualified label");
    let part = match comp {
        "A" => a,
        "cable" => c,
        _ => b,
    };
    part.ports
        .iter()
        .find(|p: &&PortDescriptor<T>| p.label == name)
        .map(|p| p.bath)
        .expect("known port")
}

/// Relative tolerance below which A and B mode frequencies count as equal.
const SYMMETRIC_TOLERANCE: f64 = 1e-9;
/// Relative mismatch beyond which the link is rejected.
const MISMATCH_LIMIT: f64 = 1e-3;

fn check_pair<T: Real>(name: &str, x: T, y: T, warnings: &mut Vec<String>) -> Result<()> {
    let rel = to_f64((x - y).abs() / x.abs().max(y.abs()));
    if rel > MISMATCH_LIMIT {
        return Err(LinkError::MismatchedTransducers(format!("{name} differs by {rel:.3e} (relative)")));
    }
    if rel > SYMMETRIC_TOLERANCE {
        warnings.push(format!("asymmetric link: {name} differs by {rel:.3e} (relative)"));
    }
    Ok(())
}

/// Builds the end-to-end response of A → cable → B on `grid`.
pub fn assemble_link<T: Real>(
    ta: &TransducerSpec<T>,
    cable: &CableSpec<T>,
    tb: &TransducerSpec<T>,
    grid: &FrequencyGrid<T>,
    mode: SolverMode,
) -> Result<NetworkResponse<T>> {
    assemble_link_with_order(ta, cable, tb, grid, mode, EliminationOrder::default())
}

pub fn assemble_link_with_order<T: Real>(
    ta: &TransducerSpec<T>,
    cable: &CableSpec<T>,
    tb: &TransducerSpec<T>,
    grid: &FrequencyGrid<T>,
    mode: SolverMode,
    order: EliminationOrder,
) -> Result<NetworkResponse<T>> {
    let mut warnings = ta.validate()?;
    for w in tb.validate()? {
        if !warnings.contains(&w) {
            warnings.push(w);
        }
    }
    cable.validate()?;
    check_pair("omega_a", ta.omega_a, tb.omega_a, &mut warnings)?;
    check_pair("omega_b", ta.omega_b, tb.omega_b, &mut warnings)?;

    let fa = ta.omega_a / T::two_pi();
    let evaluate = |delta: T| -> Result<(Vec<Complex<T>>, [ComponentS<T>; 3])> {
        let a = transducer_smatrix(delta, ta);
        let b = transducer_smatrix(delta, tb);
        let c = cable_smatrix(fa + delta / T::two_pi(), cable)?;
        let row = match mode {
            SolverMode::SinglePass => single_pass_row(&a, &c, &b),
            SolverMode::Full => full_row(&a, &c, &b, order)?,
        };
        Ok((row, [a, c, b]))
    };

    let rows: Vec<Vec<Complex<T>>> = grid
        .offsets()
        .par_iter()
        .map(|&d| evaluate(d).map(|(row, _)| row))
        .collect::<Result<_>>()?;

    let (_, [a0, c0, b0]) = evaluate(T::zero())?;
    let ports = LINK_INPUTS
        .iter()
        .map(|p| InputPort {
            label: p.label.to_owned(),
            role: p.role,
            bath: match p.role {
                PortRole::Signal => None,
                PortRole::Noise => Some(input_bath(p.label, &a0, &c0, &b0)),
            },
            band: p.band,
        })
        .collect();

    let edge = rows[0][0].norm_sqr().max(rows[rows.len() - 1][0].norm_sqr());
    let peak = rows.iter().fold(T::zero(), |m, r| m.max(r[0].norm_sqr()));
    if edge > lit::<T>(0.01) * peak {
        warnings.push(format!(
            "grid too narrow: band-edge efficiency is {:.3e} of peak",
            to_f64(edge / peak)
        ));
    }
    for w in &warnings {
        debug!("{w}");
    }
    Ok(NetworkResponse { grid: grid.clone(), ports, rows, mode, warnings })
}

/// Output-row power bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassivityReport {
    pub max_row_sum: f64,
    pub min_row_sum: f64,
    /// Grid indices where `Σ_i |S_2i|² > 1 + tolerance`.
    pub violations: Vec<usize>,
    pub tolerance: f64,
}

impl PassivityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const PASSIVITY_TOLERANCE: f64 = 1e-9;

pub fn verify_passivity<T: Real>(resp: &NetworkResponse<T>) -> PassivityReport {
    let sums: Vec<f64> = (0..resp.rows.len()).map(|j| to_f64(resp.row_sum(j))).collect();
    PassivityReport {
        max_row_sum: sums.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_row_sum: sums.iter().copied().fold(f64::INFINITY, f64::min),
        violations: sums
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 1.0 + PASSIVITY_TOLERANCE)
            .map(|(j, _)| j)
            .collect(),
        tolerance: PASSIVITY_TOLERANCE,
    }
}
