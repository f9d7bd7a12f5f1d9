//! Dense reference simulator: full 2^n x 2^n matrices built from Kronecker
//! products of textbook 2x2 gates. Qubit 0 is the leftmost factor.
#![allow(dead_code)]

use aqram::{Gate, GateKind, Statevector};
use num_complex::Complex64 as C;
use rand::Rng;

pub type Dense = Vec<Vec<C>>;
type M2 = [[C; 2]; 2];

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn m2_mul(a: &M2, b: &M2) -> M2 {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn ref_rx(t: f64) -> M2 {
    let (s, co) = (t / 2.0).sin_cos();
    [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
}

pub fn ref_ry(t: f64) -> M2 {
    let (s, co) = (t / 2.0).sin_cos();
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}

pub fn ref_rz(t: f64) -> M2 {
    [
        [C::from_polar(1.0, -t / 2.0), c(0.0, 0.0)],
        [c(0.0, 0.0), C::from_polar(1.0, t / 2.0)],
    ]
}

fn ref_single(kind: GateKind, a: &[f64]) -> M2 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        GateKind::X | GateKind::CNOT => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        GateKind::H => [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]],
        GateKind::RX | GateKind::CRX => ref_rx(a[0]),
        GateKind::RY => ref_ry(a[0]),
        GateKind::RZ | GateKind::CRZ => ref_rz(a[0]),
        GateKind::Rot => m2_mul(&m2_mul(&ref_rz(a[0]), &ref_ry(a[1])), &ref_rz(a[2])),
    }
}

fn kron(a: &Dense, b: &M2) -> Dense {
    let n = a.len();
    let mut out = vec![vec![c(0.0, 0.0); 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..2 {
                for l in 0..2 {
                    out[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn kron_chain(factors: &[M2]) -> Dense {
    factors
        .iter()
        .fold(vec![vec![c(1.0, 0.0)]], |acc, f| kron(&acc, f))
}

fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

/// Full matrix of `gate` with resolved `angles` on `n` qubits.
pub fn dense_gate(n: usize, gate: &Gate, angles: &[f64]) -> Dense {
    let id: M2 = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
    let u = ref_single(gate.kind, angles);
    if gate.kind.is_controlled() {
        let (ctrl, tgt) = (gate.targets[0], gate.targets[1]);
        let p0: M2 = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let p1: M2 = [[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        let mut off = vec![id; n];
        off[ctrl] = p0;
        let mut on = vec![id; n];
        on[ctrl] = p1;
        on[tgt] = u;
        add(&kron_chain(&off), &kron_chain(&on))
    } else {
        let mut f = vec![id; n];
        f[gate.targets[0]] = u;
        kron_chain(&f)
    }
}

pub fn mat_vec(m: &Dense, v: &[C]) -> Vec<C> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn random_state(n: usize, rng: &mut impl Rng) -> Statevector {
    let amps: Vec<C> = (0..1usize << n)
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    Statevector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

pub const ALL_KINDS: [GateKind; 9] = [
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

/// A gate of `kind` on random qubits of an `n`-qubit register with random angles.
pub fn random_gate(kind: GateKind, n: usize, rng: &mut impl Rng) -> (Gate, Vec<f64>) {
    let targets = if kind.is_controlled() {
        let ctrl = rng.gen_range(0..n);
        vec![ctrl, (ctrl + rng.gen_range(1..n)) % n]
    } else {
        vec![rng.gen_range(0..n)]
    };
    let angles: Vec<f64> = (0..kind.n_angles())
        .map(|_| rng.gen_range(-7.0..7.0))
        .collect();
    let params = angles.iter().map(|&a| aqram::Angle::Fixed(a)).collect();
    (Gate::new(kind, targets, params).unwrap(), angles)
}

/// Worst per-amplitude deviation between the kernel and the dense oracle.
pub fn oracle_deviation(state: &Statevector, gate: &Gate, angles: &[f64]) -> f64 {
    let n = state.n_qubits();
    let expected = mat_vec(&dense_gate(n, gate, angles), state.amplitudes());
    let mut got = state.clone();
    got.apply(gate, angles).unwrap();
    got.amplitudes()
        .iter()
        .zip(&expected)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}
