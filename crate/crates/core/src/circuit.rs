//! Parametric circuit templates: data embeddings, the two-qubit convolution and
//! pooling blocks, strongly entangling layers, and the full QRAM/QNN layout.

use serde::{Deserialize, Serialize};

use crate::error::{QramError, Result};
use crate::statevector::{Angle, Gate, GateKind, Statevector, C64};

/// Ordered gate list with `n_params` trainable slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamCircuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
}

impl ParamCircuit {
    /// Validates targets and requires slots to cover `0..n_params` with no gaps.
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut used: Vec<bool> = Vec::new();
        for g in &gates {
            g.validate(n_qubits)?;
            for s in g.params.iter().filter_map(|a| a.slot()) {
                if s >= used.len() {
                    used.resize(s + 1, false);
                }
                used[s] = true;
            }
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(QramError::Structure(format!(
                "parameter slot {missing} is never referenced"
            )));
        }
        Ok(ParamCircuit {
            n_qubits,
            n_params: used.len(),
            gates,
        })
    }

    pub fn empty(n_qubits: usize) -> Self {
        ParamCircuit {
            n_qubits,
            gates: Vec::new(),
            n_params: 0,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Appends `other`, shifting its slots past this circuit's.
    pub fn concat(&self, other: &ParamCircuit) -> Result<ParamCircuit> {
        if other.n_qubits != self.n_qubits {
            return Err(QramError::Structure(format!(
                "cannot concatenate {}-qubit and {}-qubit circuits",
                self.n_qubits, other.n_qubits
            )));
        }
        let offset = self.n_params;
        let mut gates = self.gates.clone();
        gates.extend(other.gates.iter().map(|g| {
            Gate {
                kind: g.kind,
                targets: g.targets.clone(),
                params: g
                    .params
                    .iter()
                    .map(|a| match *a {
                        Angle::Slot(i) => Angle::Slot(i + offset),
                        fixed => fixed,
                    })
                    .collect(),
            }
        }));
        Ok(ParamCircuit {
            n_qubits: self.n_qubits,
            gates,
            n_params: self.n_params + other.n_params,
        })
    }

    /// Substitutes `params` for every slot, giving a circuit with no trainable slots.
    pub fn bind(&self, params: &[f64]) -> Result<ParamCircuit> {
        if params.len() != self.n_params {
            return Err(QramError::Structure(format!(
                "bind expects {} params, got {}",
                self.n_params,
                params.len()
            )));
        }
        let gates = self
            .gates
            .iter()
            .map(|g| Gate {
                kind: g.kind,
                targets: g.targets.clone(),
                params: g
                    .params
                    .iter()
                    .map(|a| Angle::Fixed(a.resolve(params)))
                    .collect(),
            })
            .collect();
        Ok(ParamCircuit {
            n_qubits: self.n_qubits,
            gates,
            n_params: 0,
        })
    }

    /// JSON array of gate records in application order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.gates).expect("gate records serialize")
    }

    pub fn from_json(n_qubits: usize, json: &str) -> Result<ParamCircuit> {
        let gates: Vec<Gate> =
            serde_json::from_str(json).map_err(|e| QramError::Structure(e.to_string()))?;
        ParamCircuit::new(n_qubits, gates)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// How classical address bits enter the register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Embedding {
    #[default]
    Basis,
    Angle,
}

fn check_len(what: &str, got: usize, n_qubits: usize) -> Result<()> {
    if got != n_qubits {
        return Err(QramError::Structure(format!(
            "{what} has length {got}, expected {n_qubits}"
        )));
    }
    Ok(())
}

/// X on every qubit whose address bit is 1.
pub fn basis_embed(n_qubits: usize, address: &[u8]) -> Result<Vec<Gate>> {
    check_len("address", address.len(), n_qubits)?;
    Ok(address
        .iter()
        .enumerate()
        .filter(|(_, &b)| b != 0)
        .map(|(q, _)| Gate::x(q))
        .collect())
}

/// One fixed-angle rotation per qubit.
pub fn angle_embed(n_qubits: usize, values: &[f64], axis: Axis) -> Result<Vec<Gate>> {
    check_len("angle vector", values.len(), n_qubits)?;
    let kind = match axis {
        Axis::X => GateKind::RX,
        Axis::Y => GateKind::RY,
        Axis::Z => GateKind::RZ,
    };
    Ok(values
        .iter()
        .enumerate()
        .map(|(q, &v)| Gate::single(kind, q, Angle::Fixed(v)))
        .collect())
}

/// Address bits as `RY(pi * bit)` rotations.
pub fn address_angle_embed(n_qubits: usize, address: &[u8]) -> Result<Vec<Gate>> {
    let values: Vec<f64> = address
        .iter()
        .map(|&b| std::f64::consts::PI * f64::from(b))
        .collect();
    angle_embed(n_qubits, &values, Axis::Y)
}

/// Zero-pads `values` to `2^n_qubits`, normalizes, and installs them as real amplitudes.
pub fn amplitude_embed(values: &[f64], n_qubits: usize) -> Result<Statevector> {
    let dim = 1usize
        .checked_shl(n_qubits as u32)
        .filter(|_| (1..=crate::statevector::MAX_QUBITS).contains(&n_qubits))
        .ok_or_else(|| QramError::Config(format!("unsupported qubit count {n_qubits}")))?;
    if values.len() > dim {
        return Err(QramError::Structure(format!(
            "{} values do not fit in {dim} amplitudes",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(QramError::Degenerate("non-finite amplitude input".into()));
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(QramError::Degenerate("all-zero amplitude vector".into()));
    }
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    for (a, v) in amps.iter_mut().zip(values) {
        *a = C64::new(v / norm, 0.0);
    }
    Statevector::from_amplitudes(amps)
}

fn distinct(a: usize, b: usize, what: &str) -> Result<()> {
    if a == b {
        return Err(QramError::Structure(format!(
            "{what} needs two distinct qubits, got {a} twice"
        )));
    }
    Ok(())
}

/// Two-parameter convolution block: `RY(a)`, `RY(b)`, `CNOT(a -> b)`.
pub fn conv_block(
    qubit_a: usize,
    qubit_b: usize,
    slot_a: usize,
    slot_b: usize,
) -> Result<Vec<Gate>> {
    distinct(qubit_a, qubit_b, "conv block")?;
    Ok(vec![
        Gate::ry(qubit_a, Angle::Slot(slot_a)),
        Gate::ry(qubit_b, Angle::Slot(slot_b)),
        Gate::cnot(qubit_a, qubit_b),
    ])
}

/// Unitary pooling block: `CRZ(ctrl -> keep)`, `X(ctrl)`, `CRX(ctrl -> keep)`.
/// Both qubits stay in the register.
pub fn pool_block(
    qubit_keep: usize,
    qubit_ctrl: usize,
    slot_a: usize,
    slot_b: usize,
) -> Result<Vec<Gate>> {
    distinct(qubit_keep, qubit_ctrl, "pool block")?;
    Ok(vec![
        Gate::crz(qubit_ctrl, qubit_keep, Angle::Slot(slot_a)),
        Gate::x(qubit_ctrl),
        Gate::crx(qubit_ctrl, qubit_keep, Angle::Slot(slot_b)),
    ])
}

/// CNOT ring offset for each layer: `(l mod (n - 1)) + 1`.
pub fn entangling_ranges(n_qubits: usize, n_layers: usize) -> Vec<usize> {
    (0..n_layers).map(|l| l % (n_qubits - 1) + 1).collect()
}

/// `n_layers` of per-qubit `Rot` followed by a ranged CNOT ring.
/// Uses `3 * n_layers * n_qubits` slots starting at `starting_slot`.
pub fn strongly_entangling_layers(
    n_qubits: usize,
    n_layers: usize,
    starting_slot: usize,
) -> Result<Vec<Gate>> {
    if n_qubits < 2 {
        return Err(QramError::Structure(format!(
            "strongly entangling layers need at least 2 qubits, got {n_qubits}"
        )));
    }
    if n_layers < 1 {
        return Err(QramError::Structure("need at least one layer".into()));
    }
    let mut gates = Vec::with_capacity(n_layers * n_qubits * 2);
    let mut slot = starting_slot;
    for r in entangling_ranges(n_qubits, n_layers) {
        for q in 0..n_qubits {
            gates.push(Gate::rot(
                q,
                [
                    Angle::Slot(slot),
                    Angle::Slot(slot + 1),
                    Angle::Slot(slot + 2),
                ],
            ));
            slot += 3;
        }
        for q in 0..n_qubits {
            gates.push(Gate::cnot(q, (q + r) % n_qubits));
        }
    }
    Ok(gates)
}

/// Ring neighbours `(0,1), (1,2), ..., (n-1,0)`; for two qubits just `(0,1)`.
pub fn circular_pairs(n_qubits: usize) -> Vec<(usize, usize)> {
    match n_qubits {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        n => (0..n).map(|i| (i, (i + 1) % n)).collect(),
    }
}

/// Shape of the basic QRAM / QNN template.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QramArchitecture {
    pub n_qubits: usize,
    pub n_conv_layers: usize,
    pub n_sel_layers: usize,
}

impl QramArchitecture {
    pub fn new(n_qubits: usize) -> Self {
        QramArchitecture {
            n_qubits,
            n_conv_layers: 1,
            n_sel_layers: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 2 || self.n_qubits > crate::statevector::MAX_QUBITS {
            return Err(QramError::Config(format!(
                "QRAM needs 2..={} qubits, got {}",
                crate::statevector::MAX_QUBITS,
                self.n_qubits
            )));
        }
        if self.n_sel_layers < 1 {
            return Err(QramError::Config(
                "at least one strongly entangling layer is required".into(),
            ));
        }
        Ok(())
    }

    /// Slot count of [`build_qram_circuit`] for this shape.
    pub fn n_params(&self) -> usize {
        let pairs = circular_pairs(self.n_qubits).len();
        self.n_conv_layers * 4 * pairs + 3 * self.n_sel_layers * self.n_qubits
    }
}

/// Circular convolution + pooling rounds followed by strongly entangling layers.
pub fn build_qram_circuit(spec: &QramArchitecture) -> Result<ParamCircuit> {
    spec.validate()?;
    let n = spec.n_qubits;
    let pairs = circular_pairs(n);
    let mut gates = Vec::new();
    let mut slot = 0;
    for _ in 0..spec.n_conv_layers {
        for &(a, b) in &pairs {
            gates.extend(conv_block(a, b, slot, slot + 1)?);
            slot += 2;
        }
        for &(a, b) in &pairs {
            gates.extend(pool_block(a, b, slot, slot + 1)?);
            slot += 2;
        }
    }
    gates.extend(strongly_entangling_layers(n, spec.n_sel_layers, slot)?);
    ParamCircuit::new(n, gates)
}
