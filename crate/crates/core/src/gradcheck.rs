//! Randomized cross-check of the adjoint gradient against finite differences
//! and the parameter-shift rule.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::ParamCircuit;
use crate::error::Result;
use crate::seeding::{self, Purpose};
use crate::statevector::{Angle, Gate, GateKind, Statevector};
use crate::training::grad_expectations;
use crate::training::oracles::{
    finite_difference_grad, max_relative_error, parameter_shift_grad, GRADCHECK_DENOM_FLOOR,
};

pub const N_CIRCUITS: usize = 20;
pub const MAX_QUBITS: usize = 4;
pub const MAX_PARAMS: usize = 30;
pub const FD_STEP: f64 = 1e-4;
pub const FD_TOLERANCE: f64 = 1e-5;
pub const SHIFT_TOLERANCE: f64 = 1e-9;

const KINDS: [GateKind; 9] = [
    GateKind::X,
    GateKind::H,
    GateKind::RX,
    GateKind::RY,
    GateKind::RZ,
    GateKind::Rot,
    GateKind::CNOT,
    GateKind::CRZ,
    GateKind::CRX,
];

/// One random problem: circuit, parameters, input state and a weighted Z observable.
#[derive(Clone, Debug)]
pub struct GradProblem {
    pub circuit: ParamCircuit,
    pub params: Vec<f64>,
    pub input: Statevector,
    pub observables: Vec<usize>,
    pub upstream: Vec<f64>,
}

pub fn random_state(n_qubits: usize, rng: &mut impl Rng) -> Result<Statevector> {
    let amps: Vec<Complex64> = (0..1usize << n_qubits)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    Statevector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect())
}

fn random_angle(n_slots: &mut usize, rng: &mut impl Rng) -> Angle {
    // a few fixed angles and shared slots exercise binding and accumulation
    if rng.gen_bool(0.15) {
        return Angle::Fixed(rng.gen_range(-3.0..3.0));
    }
    if *n_slots > 0 && rng.gen_bool(0.15) {
        return Angle::Slot(rng.gen_range(0..*n_slots));
    }
    if *n_slots < MAX_PARAMS {
        *n_slots += 1;
        return Angle::Slot(*n_slots - 1);
    }
    Angle::Slot(rng.gen_range(0..*n_slots))
}

/// Random circuit on 2..=4 qubits touching every gate kind at least once.
pub fn random_problem(rng: &mut ChaCha8Rng) -> Result<GradProblem> {
    let n_qubits = rng.gen_range(2..=MAX_QUBITS);
    let n_gates = rng.gen_range(KINDS.len()..=KINDS.len() + 16);
    let mut kinds: Vec<GateKind> = KINDS.to_vec();
    kinds.extend((KINDS.len()..n_gates).map(|_| KINDS[rng.gen_range(0..KINDS.len())]));
    for i in (1..kinds.len()).rev() {
        kinds.swap(i, rng.gen_range(0..=i));
    }
    let mut n_slots = 0;
    let mut gates = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let targets = if kind.is_controlled() {
            let c = rng.gen_range(0..n_qubits);
            let t = (c + rng.gen_range(1..n_qubits)) % n_qubits;
            vec![c, t]
        } else {
            vec![rng.gen_range(0..n_qubits)]
        };
        let params = (0..kind.n_angles())
            .map(|_| random_angle(&mut n_slots, rng))
            .collect();
        gates.push(Gate::new(kind, targets, params)?);
    }
    let circuit = ParamCircuit::new(n_qubits, gates)?;
    let params = (0..circuit.n_params())
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    let input = random_state(n_qubits, rng)?;
    let observables: Vec<usize> = (0..n_qubits).collect();
    let upstream = observables
        .iter()
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    Ok(GradProblem {
        circuit,
        params,
        input,
        observables,
        upstream,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub circuits: usize,
    /// Over all circuits, `|adjoint - fd| / max(|fd|, floor)`.
    pub max_fd_rel_error: f64,
    /// Over all circuits, `|adjoint - shift|`.
    pub max_shift_abs_error: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_fd_rel_error < FD_TOLERANCE && self.max_shift_abs_error < SHIFT_TOLERANCE
    }
}

pub fn check_problem(p: &GradProblem) -> Result<(f64, f64)> {
    let adj = grad_expectations(&p.circuit, &p.params, &p.input, &p.observables, &p.upstream)?;
    let fd = finite_difference_grad(
        &p.circuit,
        &p.params,
        &p.input,
        &p.observables,
        &p.upstream,
        FD_STEP,
    )?;
    let ps = parameter_shift_grad(&p.circuit, &p.params, &p.input, &p.observables, &p.upstream)?;
    let fd_err = max_relative_error(&adj, &fd, GRADCHECK_DENOM_FLOOR);
    let ps_err = adj
        .iter()
        .zip(&ps)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((fd_err, ps_err))
}

pub fn run_suite(seed: u64) -> Result<GradcheckReport> {
    let mut rng = seeding::stream(seed, Purpose::Gradcheck, 0);
    let mut report = GradcheckReport {
        circuits: N_CIRCUITS,
        max_fd_rel_error: 0.0,
        max_shift_abs_error: 0.0,
    };
    for _ in 0..N_CIRCUITS {
        let (fd, ps) = check_problem(&random_problem(&mut rng)?)?;
        report.max_fd_rel_error = report.max_fd_rel_error.max(fd);
        report.max_shift_abs_error = report.max_shift_abs_error.max(ps);
    }
    Ok(report)
}
