//! Circuit execution and reverse-mode (adjoint) gradients of weighted Pauli-Z sums.
//!
//! For `f = <psi| H |psi>` with `H = sum_k w_k Z_k`, one forward sweep produces
//! the output state, then a single backward sweep un-applies each gate from both
//! the state and the co-state `H|psi>`, accumulating `2 Re <lambda| dU psi>` for
//! every parametrized rotation it passes.

use num_complex::Complex64;

use crate::circuit::ParamCircuit;
use crate::error::{QramError, Result};
use crate::statevector::{self, Angle, Gate, GateKind, Mat2, Statevector};

pub(crate) fn check_dims(
    circuit: &ParamCircuit,
    params: &[f64],
    input: &Statevector,
) -> Result<()> {
    if params.len() != circuit.n_params() {
        return Err(QramError::Structure(format!(
            "circuit has {} parameter slots, got {} values",
            circuit.n_params(),
            params.len()
        )));
    }
    if input.n_qubits() != circuit.n_qubits() {
        return Err(QramError::Structure(format!(
            "circuit acts on {} qubits, input state has {}",
            circuit.n_qubits(),
            input.n_qubits()
        )));
    }
    Ok(())
}

fn resolve(gate: &Gate, params: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (o, a) in out.iter_mut().zip(&gate.params) {
        *o = a.resolve(params);
    }
    out
}

/// Applies every gate of `circuit` to `state` in order.
pub fn apply_circuit(
    circuit: &ParamCircuit,
    params: &[f64],
    state: &mut Statevector,
) -> Result<()> {
    check_dims(circuit, params, state)?;
    for g in circuit.gates() {
        let angles = resolve(g, params);
        state.apply_unchecked(g, &g.matrix(&angles[..g.kind.n_angles()]));
    }
    Ok(())
}

pub fn run_circuit(
    circuit: &ParamCircuit,
    params: &[f64],
    input: &Statevector,
) -> Result<Statevector> {
    let mut state = input.clone();
    apply_circuit(circuit, params, &mut state)?;
    Ok(state)
}

/// Diagonal of `sum_k weights[k] * Z_{observables[k]}` in the computational basis.
pub fn z_observable_diagonal(n_qubits: usize, observables: &[usize], weights: &[f64]) -> Vec<f64> {
    let dim = 1usize << n_qubits;
    let mut diag = vec![0.0; dim];
    for (&q, &w) in observables.iter().zip(weights) {
        let stride = 1usize << (n_qubits - 1 - q);
        for (i, d) in diag.iter_mut().enumerate() {
            if i & stride == 0 {
                *d += w;
            } else {
                *d -= w;
            }
        }
    }
    diag
}

fn check_observables(n_qubits: usize, observables: &[usize], upstream: &[f64]) -> Result<()> {
    if observables.len() != upstream.len() {
        return Err(QramError::Structure(format!(
            "{} observables but {} upstream weights",
            observables.len(),
            upstream.len()
        )));
    }
    if let Some(q) = observables.iter().find(|&&q| q >= n_qubits) {
        return Err(QramError::Structure(format!(
            "observable on qubit {q} outside {n_qubits}-qubit register"
        )));
    }
    if upstream.iter().any(|w| !w.is_finite()) {
        return Err(QramError::Numeric("non-finite upstream gradient".into()));
    }
    Ok(())
}

const MINUS_HALF_I: Complex64 = Complex64::new(0.0, -0.5);

fn scaled(m: &Mat2, c: Complex64) -> Mat2 {
    [[m[0][0] * c, m[0][1] * c], [m[1][0] * c, m[1][1] * c]]
}

/// `d/dtheta exp(-i theta G / 2) = (-i/2) G exp(-i theta G / 2)`.
fn rotation_derivative(generator: &Mat2, rotation: &Mat2) -> Mat2 {
    scaled(&statevector::mat_mul(generator, rotation), MINUS_HALF_I)
}

fn pauli(kind: GateKind) -> Mat2 {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match kind {
        GateKind::RX | GateKind::CRX => [[o, l], [l, o]],
        GateKind::RY => [[o, -i], [i, o]],
        GateKind::RZ | GateKind::CRZ => [[l, o], [o, -l]],
        _ => unreachable!("{kind} has no rotation generator"),
    }
}

fn rotation(kind: GateKind, theta: f64) -> Mat2 {
    match kind {
        GateKind::RX | GateKind::CRX => statevector::rx(theta),
        GateKind::RY => statevector::ry(theta),
        GateKind::RZ | GateKind::CRZ => statevector::rz(theta),
        _ => unreachable!(),
    }
}

/// One step of the backward sweep for a single-angle rotation.
#[allow(clippy::too_many_arguments)]
fn backprop_rotation(
    kind: GateKind,
    targets: &[usize],
    theta: f64,
    angle: Angle,
    psi: &mut Statevector,
    lambda: &mut Statevector,
    scratch: &mut Statevector,
    grad: &mut [f64],
) {
    let u = rotation(kind, theta);
    let u_dag = statevector::dagger(&u);
    let controlled = kind.is_controlled();
    let apply = |s: &mut Statevector, m: &Mat2| {
        if controlled {
            s.apply_controlled(targets[0], targets[1], m);
        } else {
            s.apply_single(targets[0], m);
        }
    };
    apply(psi, &u_dag);
    if let Angle::Slot(slot) = angle {
        let du = rotation_derivative(&pauli(kind), &u);
        scratch.clone_from(psi);
        apply(scratch, &du);
        if controlled {
            scratch.project_control_one(targets[0]);
        }
        grad[slot] += 2.0 * lambda.inner(scratch).re;
    }
    apply(lambda, &u_dag);
}

/// Backward sweep given the circuit's output state and the diagonal observable.
pub fn adjoint_backward(
    circuit: &ParamCircuit,
    params: &[f64],
    output: Statevector,
    observable_diag: &[f64],
) -> Vec<f64> {
    let mut grad = vec![0.0; circuit.n_params()];
    let mut psi = output;
    let mut lambda = psi.clone();
    lambda.scale_diagonal(observable_diag);
    let mut scratch = psi.clone();
    for g in circuit.gates().iter().rev() {
        let angles = resolve(g, params);
        match g.kind {
            GateKind::X | GateKind::H | GateKind::CNOT => {
                let m_dag = statevector::dagger(&g.matrix(&[]));
                psi.apply_unchecked(g, &m_dag);
                lambda.apply_unchecked(g, &m_dag);
            }
            GateKind::Rot => {
                // RZ(phi) RY(theta) RZ(omega): un-apply phi, then theta, then omega
                let parts = [(GateKind::RZ, 0usize), (GateKind::RY, 1), (GateKind::RZ, 2)];
                for (kind, k) in parts {
                    backprop_rotation(
                        kind,
                        &g.targets,
                        angles[k],
                        g.params[k],
                        &mut psi,
                        &mut lambda,
                        &mut scratch,
                        &mut grad,
                    );
                }
            }
            kind => backprop_rotation(
                kind,
                &g.targets,
                angles[0],
                g.params[0],
                &mut psi,
                &mut lambda,
                &mut scratch,
                &mut grad,
            ),
        }
    }
    grad
}

/// Gradient of `sum_k upstream[k] * <Z_{observables[k]}>` with respect to `params`.
pub fn grad_expectations(
    circuit: &ParamCircuit,
    params: &[f64],
    input: &Statevector,
    observables: &[usize],
    upstream: &[f64],
) -> Result<Vec<f64>> {
    check_observables(circuit.n_qubits(), observables, upstream)?;
    let output = run_circuit(circuit, params, input)?;
    let diag = z_observable_diagonal(circuit.n_qubits(), observables, upstream);
    Ok(adjoint_backward(circuit, params, output, &diag))
}

/// Forward pass, reads `<Z>` on `observables`, asks `head` for a loss and the
/// loss gradient with respect to those expectations, then backpropagates.
pub fn loss_and_param_grad<F>(
    circuit: &ParamCircuit,
    params: &[f64],
    input: &Statevector,
    observables: &[usize],
    head: F,
) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let output = run_circuit(circuit, params, input)?;
    let all = output.expectations_z();
    let picked: Vec<f64> = observables.iter().map(|&q| all[q]).collect();
    let (loss, upstream) = head(&picked)?;
    check_observables(circuit.n_qubits(), observables, &upstream)?;
    let diag = z_observable_diagonal(circuit.n_qubits(), observables, &upstream);
    Ok((loss, adjoint_backward(circuit, params, output, &diag)))
}
