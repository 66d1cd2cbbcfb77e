//! Quick self-check of the simulator's structural invariants.

use std::f64::consts::PI;

use nalgebra::Complex;
use serde::Serialize;

use crate::analytics::{p_err_improved_formula, p_err_simple_formula};
use crate::error::Result;
use crate::fock::{FockSpace, PauliAxis};
use crate::gkp::{gaussian_displacement_channel, helstrom_bound, logical_z_expectation, ChannelOptions, GkpStatePair, OscillatorState};
use crate::readout::{single_round_p_err, ReadoutCircuit};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check {
        name,
        passed: value <= limit,
        detail: format!("{value:.3e} <= {limit:.0e}"),
    }
}

/// Runs every invariant on Δ = 0.35 states at cutoffs 150 and 300.
pub fn run_suite() -> Result<Vec<Check>> {
    let fs = FockSpace::<f64>::with_cutoff(150)?;
    let fine = FockSpace::<f64>::with_cutoff(300)?;
    let pair = GkpStatePair::symmetric(&fs, 0.35)?;
    let ket = pair.zero.as_ket().cloned().expect("symmetric pair is pure");
    let mut out = Vec::new();

    let d = fs.displacement(Complex::new(0.7, -0.4))?;
    let u = fs.rabi_gate(PauliAxis::X, Complex::new(0.0, PI.sqrt() / 2.0))?;
    out.push(check("unitarity", d.unitarity_defect(40).max(u.unitarity_defect(40)), 1e-10));

    let circuit = ReadoutCircuit::new(&fs, 0.1)?;
    let shot = circuit.run(&pair.zero)?;
    out.push(check(
        "probability conservation",
        (shot.probabilities[0] + shot.probabilities[1] - 1.0).abs(),
        1e-10,
    ));

    let reduced = circuit.reduced_state(&pair.zero)?;
    let mut sum = reduced.matrix() * Complex::new(0.0, 0.0);
    for q in 0..2 {
        if let Some(post) = &shot.post[q] {
            sum += post.to_density().into_matrix() * Complex::new(shot.probabilities[q], 0.0);
        }
    }
    let diff = (sum - reduced.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    out.push(check("back-action consistency", diff, 1e-9));

    let rotated = circuit.run(&OscillatorState::Pure(ket.with_global_phase(2.1)))?;
    out.push(check(
        "global-phase invariance",
        (rotated.probabilities[0] - shot.probabilities[0]).abs(),
        1e-12,
    ));

    let bound = helstrom_bound(&pair.zero, &pair.one)?;
    let mut shortfall: f64 = 0.0;
    for l in [0.0, 0.05, 0.1, 0.2] {
        shortfall = shortfall.max(bound - single_round_p_err(&fs, &pair, l)?);
    }
    out.push(check("Helstrom dominance", shortfall, 1e-10));

    let plain = fs.x_spectrum().function(|x| Complex::new((PI.sqrt() / 2.0 * x).cos(), 0.0));
    let p_plain = (plain * ket.amplitudes()).norm_squared();
    let p_circuit = ReadoutCircuit::new(&fs, 0.0)?.run(&pair.zero)?.probabilities[0];
    let formula_gap = (p_err_improved_formula(0.35f64, 0.0)? - p_err_simple_formula(0.35f64)?).abs();
    out.push(check("lambda = 0 reduction", (p_plain - p_circuit).abs().max(formula_gap), 1e-14));

    let fine_pair = GkpStatePair::symmetric(&fine, 0.35)?;
    let z_gap = (logical_z_expectation(&fs, &pair.zero)?.re - logical_z_expectation(&fine, &fine_pair.zero)?.re).abs();
    let p_gap = (single_round_p_err(&fs, &pair, 0.1)? - single_round_p_err(&fine, &fine_pair, 0.1)?).abs();
    out.push(check("convergence in N", z_gap.max(p_gap), 1e-8));

    let opts = ChannelOptions::default();
    let step = gaussian_displacement_channel(&fs, &pair.zero, 0.06, opts)?;
    let twice = gaussian_displacement_channel(&fs, &OscillatorState::Mixed(step), 0.08, opts)?;
    let once = gaussian_displacement_channel(&fs, &pair.zero, 0.1, opts)?;
    out.push(check("channel semigroup", twice.max_distance(&once)?, 1e-6));

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let checks = run_suite().unwrap();
        assert_eq!(checks.len(), 8);
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
