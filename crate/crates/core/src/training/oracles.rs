//! Forward-only gradient references used to cross-check the adjoint sweep.
//! Nothing here touches the backward pass.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use crate::circuit::ParamCircuit;
use crate::error::Result;
use crate::statevector::{GateKind, Statevector};

use super::adjoint::{check_dims, z_observable_diagonal};

/// `sum_i diag_i |psi_i|^2` after running the circuit, optionally shifting one
/// angle occurrence `(gate index, angle index)` by `delta`.
fn weighted_z(
    circuit: &ParamCircuit,
    params: &[f64],
    input: &Statevector,
    diag: &[f64],
    shift: Option<(usize, usize, f64)>,
) -> Result<f64> {
    check_dims(circuit, params, input)?;
    let mut s = input.clone();
    for (gi, g) in circuit.gates().iter().enumerate() {
        let mut angles: Vec<f64> = g.params.iter().map(|a| a.resolve(params)).collect();
        if let Some((sg, sa, delta)) = shift {
            if sg == gi {
                angles[sa] += delta;
            }
        }
        s.apply(g, &angles)?;
    }
    Ok(s.amplitudes()
        .iter()
        .zip(diag)
        .map(|(a, d)| a.norm_sqr() * d)
        .sum())
}

/// Parameter-shift gradient. Plain rotations use the two-term rule; controlled
/// rotations (generator spectrum {0, +-1/2}) use the four-term rule.
pub fn parameter_shift_grad(
    circuit: &ParamCircuit,
    params: &[f64],
    input: &Statevector,
    observables: &[usize],
    upstream: &[f64],
) -> Result<Vec<f64>> {
    let diag = z_observable_diagonal(circuit.n_qubits(), observables, upstream);
    let f =
        |gi: usize, ai: usize, d: f64| weighted_z(circuit, params, input, &diag, Some((gi, ai, d)));
    let mut grad = vec![0.0; circuit.n_params()];
    for (gi, g) in circuit.gates().iter().enumerate() {
        for (ai, a) in g.params.iter().enumerate() {
            let Some(slot) = a.slot() else { continue };
            let d = match g.kind {
                GateKind::CRX | GateKind::CRZ => {
                    let c_plus = (SQRT_2 + 1.0) / (4.0 * SQRT_2);
                    let c_minus = (SQRT_2 - 1.0) / (4.0 * SQRT_2);
                    c_plus * (f(gi, ai, FRAC_PI_2)? - f(gi, ai, -FRAC_PI_2)?)
                        - c_minus * (f(gi, ai, 3.0 * FRAC_PI_2)? - f(gi, ai, -3.0 * FRAC_PI_2)?)
                }
                _ => 0.5 * (f(gi, ai, FRAC_PI_2)? - f(gi, ai, -FRAC_PI_2)?),
            };
            grad[slot] += d;
        }
    }
    Ok(grad)
}

/// Central finite differences over parameter slots.
pub fn finite_difference_grad(
    circuit: &ParamCircuit,
    params: &[f64],
    input: &Statevector,
    observables: &[usize],
    upstream: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    let diag = z_observable_diagonal(circuit.n_qubits(), observables, upstream);
    let mut work = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        work[i] = params[i] + step;
        let up = weighted_z(circuit, &work, input, &diag, None)?;
        work[i] = params[i] - step;
        let down = weighted_z(circuit, &work, input, &diag, None)?;
        work[i] = params[i];
        grad.push((up - down) / (2.0 * step));
    }
    Ok(grad)
}

/// Largest elementwise `|a - b| / max(|b|, denom_floor)` where `b` is the reference.
pub fn max_relative_error(a: &[f64], b: &[f64], denom_floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(denom_floor))
        .fold(0.0, f64::max)
}

/// Denominator floor that turns "relative 1e-5" into "or absolute 1e-7" for
/// near-zero reference entries.
pub const GRADCHECK_DENOM_FLOOR: f64 = 1e-7 / 1e-5;
