use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use crate::error::{LinkError, Result};
use crate::scalar::Real;
use crate::units::{parse_quantity, Dimension};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchKind<T> {
    /// Farads.
    Capacitor(T),
    /// Henries.
    Inductor(T),
    /// Junction marker carrying the Josephson energy in joules.
    Junction(T),
}

impl<T: Real> BranchKind<T> {
    fn value(&self) -> T {
        match *self {
            BranchKind::Capacitor(v) | BranchKind::Inductor(v) | BranchKind::Junction(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T> {
    pub id: String,
    pub from: String,
    pub to: String,
    pub kind: BranchKind<T>,
}

/// Lumped-element circuit with one distinguished ground node and one junction branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Netlist<T> {
    ground: String,
    branches: Vec<Branch<T>>,
    junction: usize,
}

impl<T: Real> Netlist<T> {
    /// Validates and builds a netlist. `junction` names the reference branch,
    /// which must be the only `Junction` branch.
    pub fn new(ground: impl Into<String>, branches: Vec<Branch<T>>, junction: &str) -> Result<Self> {
        let ground = ground.into();
        let mut seen = HashMap::new();
        for (i, b) in branches.iter().enumerate() {
            if seen.insert(b.id.as_str(), i).is_some() {
                return Err(LinkError::InvalidNetlist(format!("duplicate branch id {:?}", b.id)));
            }
            if b.from == b.to {
                return Err(LinkError::InvalidNetlist(format!("branch {:?} is a self-loop", b.id)));
            }
            let v = b.kind.value();
            if !(v > T::zero()) || !v.is_finite() {
                return Err(LinkError::InvalidNetlist(format!(
                    "branch {:?} must have a strictly positive value",
                    b.id
                )));
            }
        }
        let junctions: Vec<&str> = branches
            .iter()
            .filter(|b| matches!(b.kind, BranchKind::Junction(_)))
            .map(|b| b.id.as_str())
            .collect();
        if junctions.len() != 1 {
            return Err(LinkError::InvalidNetlist(format!(
                "exactly one junction branch required, found {}",
                junctions.len()
            )));
        }
        if junctions[0] != junction {
            return Err(LinkError::InvalidNetlist(format!(
                "junction line names {junction:?} but the junction branch is {:?}",
                junctions[0]
            )));
        }
        let junction = seen[junction];
        let netlist = Self { ground, branches, junction };
        netlist.check_connected()?;
        Ok(netlist)
    }

    fn check_connected(&self) -> Result<()> {
        let nodes = self.nodes();
        let index = self.node_index();
        let mut parent: Vec<usize> = (0..=nodes.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let gnd = nodes.len();
        let id = |n: &str| index.get(n).copied().unwrap_or(gnd);
        for b in &self.branches {
            let (a, c) = (find(&mut parent, id(&b.from)), find(&mut parent, id(&b.to)));
            parent[a] = c;
        }
        let root = find(&mut parent, gnd);
        for (i, n) in nodes.iter().enumerate() {
            if find(&mut parent, i) != root {
                return Err(LinkError::InvalidNetlist(format!("node {n:?} is not connected to ground")));
            }
        }
        if !self.branches.iter().any(|b| b.from == self.ground || b.to == self.ground) {
            return Err(LinkError::InvalidNetlist(format!("no branch touches ground {:?}", self.ground)));
        }
        Ok(())
    }

    pub fn ground(&self) -> &str {
        &self.ground
    }

    pub fn branches(&self) -> &[Branch<T>] {
        &self.branches
    }

    pub fn junction(&self) -> &Branch<T> {
        &self.branches[self.junction]
    }

    /// Josephson energy of the junction branch in joules.
    pub fn junction_energy(&self) -> T {
        self.junction().kind.value()
    }

    /// Non-ground nodes in order of first appearance.
    pub fn nodes(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for b in &self.branches {
            for n in [b.from.as_str(), b.to.as_str()] {
                if n != self.ground && !out.contains(&n) {
                    out.push(n);
                }
            }
        }
        out
    }

    pub(crate) fn node_index(&self) -> HashMap<&str, usize> {
        self.nodes().into_iter().enumerate().map(|(i, n)| (n, i)).collect()
    }

    /// Multiplies every capacitance and inductance by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        for b in &mut out.branches {
            b.kind = match b.kind {
                BranchKind::Capacitor(c) => BranchKind::Capacitor(c * factor),
                BranchKind::Inductor(l) => BranchKind::Inductor(l * factor),
                j => j,
            };
        }
        out
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBranch {
    id: Option<String>,
    from: String,
    to: String,
    kind: String,
    value: RawValue,
    unit: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetlist {
    #[serde(default = "default_ground")]
    ground: String,
    junction: String,
    #[serde(default)]
    branch: Vec<RawBranch>,
    /// Free-form annotations, ignored by the solver.
    #[serde(default)]
    #[allow(dead_code)]
    meta: BTreeMap<String, toml::Value>,
}

fn default_ground() -> String {
    "gnd".to_string()
}

/// Parses the netlist text format:
///
/// ```toml
/// junction = "J"
/// [[branch]]
/// id = "Lb"
/// from = "x"
/// to = "gnd"
/// kind = "L"
/// value = "23.3 nH"
/// ```
///
/// `value` may also be a bare number with a separate `unit` key. Junction
/// values are Josephson energies, written as E_J/h (`"3.51 GHz"`) or joules.
pub fn parse_netlist(text: &str) -> Result<Netlist<f64>> {
    let raw: RawNetlist = toml::from_str(text)?;
    let mut branches = Vec::with_capacity(raw.branch.len());
    for (i, rb) in raw.branch.into_iter().enumerate() {
        let id = rb.id.unwrap_or_else(|| format!("b{i}"));
        let dim = match rb.kind.as_str() {
            "C" => Dimension::Capacitance,
            "L" => Dimension::Inductance,
            "J" => Dimension::Energy,
            k => {
                return Err(LinkError::InvalidNetlist(format!(
                    "branch {id:?}: unknown kind {k:?} (expected C, L or J)"
                )))
            }
        };
        let text = match (&rb.value, &rb.unit) {
            (RawValue::Number(v), Some(u)) => format!("{v} {u}"),
            (RawValue::Number(v), None) => v.to_string(),
            (RawValue::Text(s), None) => s.clone(),
            (RawValue::Text(s), Some(u)) => format!("{s} {u}"),
        };
        let v = parse_quantity(&text, dim)
            .map_err(|e| LinkError::InvalidNetlist(format!("branch {id:?}: {e}")))?;
        let kind = match dim {
            Dimension::Capacitance => BranchKind::Capacitor(v),
            Dimension::Inductance => BranchKind::Inductor(v),
            _ => BranchKind::Junction(v),
        };
        branches.push(Branch { id, from: rb.from, to: rb.to, kind });
    }
    Netlist::new(raw.ground, branches, &raw.junction)
}

pub fn read_netlist(path: impl AsRef<Path>) -> Result<Netlist<f64>> {
    parse_netlist(&std::fs::read_to_string(path)?)
}
