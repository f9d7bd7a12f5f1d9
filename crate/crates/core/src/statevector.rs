//! Dense statevector simulation.
//!
//! Qubit 0 is the most significant bit of the amplitude index, so the basis
//! state `|q0 q1 ... q(n-1)>` lives at index `q0 * 2^(n-1) + ... + q(n-1)`.
//! Gates are applied in place by iterating over amplitude pairs with a
//! stride, never by building the full `2^n x 2^n` operator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{QramError, Result};

pub type C64 = Complex64;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 14;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// 2x2 complex matrix, row-major.
pub type Mat2 = [[C64; 2]; 2];

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

pub fn dagger(m: &Mat2) -> Mat2 {
    [
        [m[0][0].conj(), m[1][0].conj()],
        [m[0][1].conj(), m[1][1].conj()],
    ]
}

pub fn pauli_x() -> Mat2 {
    [[ZERO, ONE], [ONE, ZERO]]
}

pub fn hadamard() -> Mat2 {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

pub fn rx(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [C64::new(c, 0.0), C64::new(0.0, -s)],
        [C64::new(0.0, -s), C64::new(c, 0.0)],
    ]
}

pub fn ry(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [C64::new(c, 0.0), C64::new(-s, 0.0)],
        [C64::new(s, 0.0), C64::new(c, 0.0)],
    ]
}

pub fn rz(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [[C64::new(c, -s), ZERO], [ZERO, C64::new(c, s)]]
}

/// `RZ(phi) * RY(theta) * RZ(omega)`: omega acts on the state first.
pub fn rot(phi: f64, theta: f64, omega: f64) -> Mat2 {
    mat_mul(&rz(phi), &mat_mul(&ry(theta), &rz(omega)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    X,
    H,
    RX,
    RY,
    RZ,
    Rot,
    CNOT,
    CRZ,
    CRX,
}

impl GateKind {
    /// Number of qubits the gate acts on.
    pub fn arity(self) -> usize {
        match self {
            GateKind::CNOT | GateKind::CRZ | GateKind::CRX => 2,
            _ => 1,
        }
    }

    /// Number of angles the gate consumes.
    pub fn n_angles(self) -> usize {
        match self {
            GateKind::X | GateKind::H | GateKind::CNOT => 0,
            GateKind::Rot => 3,
            _ => 1,
        }
    }

    pub fn is_controlled(self) -> bool {
        self.arity() == 2
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Source of one gate angle: a constant, or a slot in the circuit's parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Angle {
    Fixed(f64),
    Slot(usize),
}

impl Angle {
    pub fn resolve(self, params: &[f64]) -> f64 {
        match self {
            Angle::Fixed(v) => v,
            Angle::Slot(i) => params[i],
        }
    }

    pub fn slot(self) -> Option<usize> {
        match self {
            Angle::Slot(i) => Some(i),
            Angle::Fixed(_) => None,
        }
    }
}

/// A gate instance. For controlled kinds `targets` is `[control, target]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub params: Vec<Angle>,
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>, params: Vec<Angle>) -> Result<Self> {
        let gate = Gate {
            kind,
            targets,
            params,
        };
        gate.check_shape()?;
        Ok(gate)
    }

    pub fn x(q: usize) -> Self {
        Gate {
            kind: GateKind::X,
            targets: vec![q],
            params: vec![],
        }
    }

    pub fn h(q: usize) -> Self {
        Gate {
            kind: GateKind::H,
            targets: vec![q],
            params: vec![],
        }
    }

    pub fn single(kind: GateKind, q: usize, angle: Angle) -> Self {
        debug_assert!(kind.arity() == 1 && kind.n_angles() == 1);
        Gate {
            kind,
            targets: vec![q],
            params: vec![angle],
        }
    }

    pub fn rx(q: usize, angle: Angle) -> Self {
        Gate::single(GateKind::RX, q, angle)
    }

    pub fn ry(q: usize, angle: Angle) -> Self {
        Gate::single(GateKind::RY, q, angle)
    }

    pub fn rz(q: usize, angle: Angle) -> Self {
        Gate::single(GateKind::RZ, q, angle)
    }

    pub fn rot(q: usize, angles: [Angle; 3]) -> Self {
        Gate {
            kind: GateKind::Rot,
            targets: vec![q],
            params: angles.to_vec(),
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate {
            kind: GateKind::CNOT,
            targets: vec![control, target],
            params: vec![],
        }
    }

    pub fn crz(control: usize, target: usize, angle: Angle) -> Self {
        Gate {
            kind: GateKind::CRZ,
            targets: vec![control, target],
            params: vec![angle],
        }
    }

    pub fn crx(control: usize, target: usize, angle: Angle) -> Self {
        Gate {
            kind: GateKind::CRX,
            targets: vec![control, target],
            params: vec![angle],
        }
    }

    /// Checks arity, angle count and target distinctness.
    pub fn check_shape(&self) -> Result<()> {
        if self.targets.len() != self.kind.arity() {
            return Err(QramError::Structure(format!(
                "{} expects {} target(s), got {}",
                self.kind,
                self.kind.arity(),
                self.targets.len()
            )));
        }
        if self.params.len() != self.kind.n_angles() {
            return Err(QramError::Structure(format!(
                "{} expects {} angle(s), got {}",
                self.kind,
                self.kind.n_angles(),
                self.params.len()
            )));
        }
        if self.targets.len() == 2 && self.targets[0] == self.targets[1] {
            return Err(QramError::Structure(format!(
                "{} control and target coincide on qubit {}",
                self.kind, self.targets[0]
            )));
        }
        Ok(())
    }

    /// Shape check plus bounds against a register of `n_qubits`.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        self.check_shape()?;
        if let Some(&q) = self.targets.iter().find(|&&q| q >= n_qubits) {
            return Err(QramError::Structure(format!(
                "{} targets qubit {} but register has {} qubits",
                self.kind, q, n_qubits
            )));
        }
        Ok(())
    }

    /// The 2x2 block this gate applies (to the target, conditioned on the control
    /// for controlled kinds).
    pub fn matrix(&self, angles: &[f64]) -> Mat2 {
        match self.kind {
            GateKind::X | GateKind::CNOT => pauli_x(),
            GateKind::H => hadamard(),
            GateKind::RX | GateKind::CRX => rx(angles[0]),
            GateKind::RY => ry(angles[0]),
            GateKind::RZ | GateKind::CRZ => rz(angles[0]),
            GateKind::Rot => rot(angles[0], angles[1], angles[2]),
        }
    }
}

/// Complex amplitude vector over `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl Statevector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(QramError::Config(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(Statevector { n_qubits, amps })
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut sv = Statevector::zero(n_qubits)?;
        if index >= sv.amps.len() {
            return Err(QramError::Structure(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        sv.amps[0] = ZERO;
        sv.amps[index] = ONE;
        Ok(sv)
    }

    /// Wraps an amplitude vector; its length must be a power of two and its norm 1.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QramError::Structure(format!(
                "amplitude length {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(QramError::Config(format!(
                "{n_qubits} qubits exceeds the limit of {MAX_QUBITS}"
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(QramError::Structure(format!(
                "amplitudes have squared norm {norm}, expected 1"
            )));
        }
        Ok(Statevector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Statevector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    #[inline]
    fn stride(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(QramError::Structure(format!(
                "qubit {q} out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// Applies `gate` with its angles already resolved.
    pub fn apply(&mut self, gate: &Gate, angles: &[f64]) -> Result<()> {
        gate.validate(self.n_qubits)?;
        if angles.len() != gate.kind.n_angles() {
            return Err(QramError::Structure(format!(
                "{} needs {} resolved angle(s), got {}",
                gate.kind,
                gate.kind.n_angles(),
                angles.len()
            )));
        }
        self.apply_unchecked(gate, &gate.matrix(angles));
        Ok(())
    }

    /// Applies the inverse of `gate` at the given angles.
    pub fn apply_inverse(&mut self, gate: &Gate, angles: &[f64]) -> Result<()> {
        gate.validate(self.n_qubits)?;
        if angles.len() != gate.kind.n_angles() {
            return Err(QramError::Structure(format!(
                "{} needs {} resolved angle(s), got {}",
                gate.kind,
                gate.kind.n_angles(),
                angles.len()
            )));
        }
        self.apply_unchecked(gate, &dagger(&gate.matrix(angles)));
        Ok(())
    }

    /// Applies `block` on the gate's target(s); caller guarantees validity.
    pub(crate) fn apply_unchecked(&mut self, gate: &Gate, block: &Mat2) {
        if gate.kind.is_controlled() {
            self.apply_controlled(gate.targets[0], gate.targets[1], block);
        } else {
            self.apply_single(gate.targets[0], block);
        }
    }

    pub(crate) fn apply_single(&mut self, q: usize, m: &Mat2) {
        let stride = self.stride(q);
        let dim = self.amps.len();
        let [[m00, m01], [m10, m11]] = *m;
        let mut base = 0;
        while base < dim {
            for i in base..base + stride {
                let a = self.amps[i];
                let b = self.amps[i + stride];
                self.amps[i] = m00 * a + m01 * b;
                self.amps[i + stride] = m10 * a + m11 * b;
            }
            base += stride << 1;
        }
    }

    pub(crate) fn apply_controlled(&mut self, control: usize, target: usize, m: &Mat2) {
        let cs = self.stride(control);
        let ts = self.stride(target);
        let (lo, hi) = if cs < ts { (cs, ts) } else { (ts, cs) };
        let [[m00, m01], [m10, m11]] = *m;
        for k in 0..self.amps.len() >> 2 {
            // spread k around the two zero bits, then raise the control bit
            let mut i = k;
            i = (i & (lo - 1)) | ((i & !(lo - 1)) << 1);
            i = (i & (hi - 1)) | ((i & !(hi - 1)) << 1);
            i |= cs;
            let j = i | ts;
            let a = self.amps[i];
            let b = self.amps[j];
            self.amps[i] = m00 * a + m01 * b;
            self.amps[j] = m10 * a + m11 * b;
        }
    }

    /// Zeroes every amplitude whose `control` bit is 0.
    pub(crate) fn project_control_one(&mut self, control: usize) {
        let cs = self.stride(control);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & cs == 0 {
                *a = ZERO;
            }
        }
    }

    /// Multiplies each amplitude by a real diagonal weight.
    pub(crate) fn scale_diagonal(&mut self, diag: &[f64]) {
        for (a, w) in self.amps.iter_mut().zip(diag) {
            *a *= *w;
        }
    }

    /// Per-qubit Z eigenvalue (+1 for bit 0, -1 for bit 1) at `index`.
    #[inline]
    pub fn z_sign(&self, qubit: usize, index: usize) -> f64 {
        if index & self.stride(qubit) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `<Z>` on `qubit`.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let stride = self.stride(qubit);
        let e: f64 = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if i & stride == 0 {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum();
        Ok(e.clamp(-1.0, 1.0))
    }

    /// `<Z>` on every qubit, in qubit order.
    pub fn expectations_z(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_qubits];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, e) in out.iter_mut().enumerate() {
                if i & self.stride(q) == 0 {
                    *e += p;
                } else {
                    *e -= p;
                }
            }
        }
        out.iter_mut().for_each(|e| *e = e.clamp(-1.0, 1.0));
        out
    }

    /// Probability of measuring `qubit` as 1.
    pub fn prob_one(&self, qubit: usize) -> Result<f64> {
        Ok((1.0 - self.expectation_z(qubit)?) / 2.0)
    }

    /// Probability of 1 on every qubit.
    pub fn probs_one(&self) -> Vec<f64> {
        self.expectations_z()
            .into_iter()
            .map(|e| (1.0 - e) / 2.0)
            .collect()
    }
}

/// Basis bits of `index` on `n` lines, most significant first.
pub fn index_to_bits(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|q| ((index >> (n - 1 - q)) & 1) as u8).collect()
}

/// Inverse of [`index_to_bits`].
pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b as usize & 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn init_zero_shapes() {
        let s1 = Statevector::zero(1).unwrap();
        assert_eq!(s1.amplitudes(), &[ONE, ZERO]);
        let s2 = Statevector::zero(2).unwrap();
        assert_eq!(s2.amplitudes(), &[ONE, ZERO, ZERO, ZERO]);
        let s3 = Statevector::zero(3).unwrap();
        assert_eq!(s3.amplitudes().len(), 8);
        assert_eq!(s3.amplitudes()[0], ONE);
    }

    #[test]
    fn init_zero_rejects_out_of_range() {
        assert!(matches!(Statevector::zero(0), Err(QramError::Config(_))));
        assert!(matches!(Statevector::zero(15), Err(QramError::Config(_))));
        assert!(Statevector::zero(14).is_ok());
    }

    #[test]
    fn x_flips_qubit_zero() {
        let mut s = Statevector::zero(1).unwrap();
        s.apply(&Gate::x(0), &[]).unwrap();
        assert_eq!(s.amplitudes(), &[ZERO, ONE]);
    }

    #[test]
    fn cnot_on_10_gives_11() {
        let mut s = Statevector::basis(2, 0b10).unwrap();
        s.apply(&Gate::cnot(0, 1), &[]).unwrap();
        assert_eq!(s, Statevector::basis(2, 0b11).unwrap());
    }

    #[test]
    fn cnot_inert_when_control_clear() {
        let mut s = Statevector::basis(2, 0b01).unwrap();
        s.apply(&Gate::cnot(0, 1), &[]).unwrap();
        assert_eq!(s, Statevector::basis(2, 0b01).unwrap());
    }

    #[test]
    fn hadamard_superposition() {
        let mut s = Statevector::zero(1).unwrap();
        s.apply(&Gate::h(0), &[]).unwrap();
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        assert!(close(s.amplitudes()[0], h));
        assert!(close(s.amplitudes()[1], h));
        assert!(s.expectation_z(0).unwrap().abs() < 1e-12);
        assert!((s.prob_one(0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ry_pi_flips_up_to_sign() {
        let mut s = Statevector::zero(1).unwrap();
        s.apply(&Gate::ry(0, Angle::Fixed(PI)), &[PI]).unwrap();
        assert!(s.amplitudes()[0].norm() < 1e-12);
        assert!((s.amplitudes()[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn z_readout_on_eigenstates() {
        let zero = Statevector::zero(1).unwrap();
        let one = Statevector::basis(1, 1).unwrap();
        assert_eq!(zero.expectation_z(0).unwrap(), 1.0);
        assert_eq!(one.expectation_z(0).unwrap(), -1.0);
        assert_eq!(zero.prob_one(0).unwrap(), 0.0);
        assert_eq!(one.prob_one(0).unwrap(), 1.0);
    }

    #[test]
    fn msb_convention() {
        // |10> : qubit 0 is 1, qubit 1 is 0
        let s = Statevector::basis(2, 0b10).unwrap();
        assert_eq!(s.expectations_z(), vec![-1.0, 1.0]);
        assert_eq!(index_to_bits(0b101, 3), vec![1, 0, 1]);
        assert_eq!(bits_to_index(&[1, 0, 1]), 5);
    }

    #[test]
    fn invalid_targets_are_structural_errors() {
        let mut s = Statevector::zero(2).unwrap();
        assert!(matches!(
            s.apply(&Gate::x(2), &[]),
            Err(QramError::Structure(_))
        ));
        assert!(matches!(
            s.apply(&Gate::cnot(1, 1), &[]),
            Err(QramError::Structure(_))
        ));
        assert!(matches!(s.expectation_z(5), Err(QramError::Structure(_))));
        assert!(matches!(
            s.apply(&Gate::rx(0, Angle::Slot(0)), &[]),
            Err(QramError::Structure(_))
        ));
    }

    #[test]
    fn from_amplitudes_validates() {
        assert!(Statevector::from_amplitudes(vec![ONE, ZERO, ZERO]).is_err());
        assert!(Statevector::from_amplitudes(vec![ONE, ONE]).is_err());
        assert!(Statevector::from_amplitudes(vec![ZERO, ONE]).is_ok());
    }

    #[test]
    fn rot_matches_product_of_rotations() {
        let (phi, theta, omega) = (0.3, -1.1, 2.4);
        let mut a = Statevector::basis(1, 1).unwrap();
        a.apply(
            &Gate::rot(0, [Angle::Slot(0), Angle::Slot(1), Angle::Slot(2)]),
            &[phi, theta, omega],
        )
        .unwrap();
        let mut b = Statevector::basis(1, 1).unwrap();
        b.apply(&Gate::rz(0, Angle::Slot(0)), &[omega]).unwrap();
        b.apply(&Gate::ry(0, Angle::Slot(0)), &[theta]).unwrap();
        b.apply(&Gate::rz(0, Angle::Slot(0)), &[phi]).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!(close(*x, *y));
        }
    }
}
