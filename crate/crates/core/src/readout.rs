//! Qubit-assisted readout of GKP states and the homodyne baseline.
//!
//! The circuit acts on `|0⟩_qubit ⊗ ρ` with `U_y(−λ) = exp(iλPσ_y)` followed
//! by `U_x(i√π/2) = exp(i(√π/2)Xσ_x)`, and the qubit is then measured in the
//! computational basis. Tracing out the qubit leaves the Kraus operators
//!
//! ```text
//! K₀ = cos(θX) cos(λP) − i sin(θX) sin(λP)
//! K₁ = i sin(θX) cos(λP) − cos(θX) sin(λP),   θ = √π/2
//! ```
//!
//! on the oscillator, with `K₀†K₀ + K₁†K₁ = I` exactly on the truncated space.

use std::fmt::Write as _;

use nalgebra::{Complex, ComplexField, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{GkpError, Result};
use crate::fock::{DensityOp, FockSpace, LinearOp, OscillatorKet, Space};
use crate::gkp::{effective_squeezing, GkpStatePair, LogicalBit, OscillatorState};
use crate::scalar::{cplx, creal, lit, matmul, matmul_adj_right, to_f64, CMatrix, Real};

/// Largest supported number of majority-vote rounds.
pub const MAX_ROUNDS: usize = 9;
/// `|λ|` above which [`CircuitParams::warnings`] reports a warning.
pub const LAMBDA_WARN: f64 = 0.5;

/// Qubit outcome read as logical `0`. For `λ = 0`, `p(0) = ½(1 + ⟨Z⟩)`, so
/// outcome `0` is the likely one for `|0̃⟩`; pinned by a calibration test.
pub const LOGICAL_ZERO_OUTCOME: usize = 0;

pub fn outcome_to_logical(outcome: usize) -> LogicalBit {
    if outcome == LOGICAL_ZERO_OUTCOME {
        LogicalBit::Zero
    } else {
        LogicalBit::One
    }
}

pub fn logical_to_outcome(bit: LogicalBit) -> usize {
    match bit {
        LogicalBit::Zero => LOGICAL_ZERO_OUTCOME,
        LogicalBit::One => 1 - LOGICAL_ZERO_OUTCOME,
    }
}

/// Interaction strength and number of majority-vote rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams<T> {
    pub lambda: T,
    pub rounds: usize,
}

impl<T: Real> CircuitParams<T> {
    pub fn new(lambda: T, rounds: usize) -> Result<Self> {
        if rounds == 0 || rounds % 2 == 0 {
            return Err(GkpError::invalid("rounds", format!("must be odd and >= 1, got {rounds}")));
        }
        if rounds > MAX_ROUNDS {
            return Err(GkpError::invalid("rounds", format!("at most {MAX_ROUNDS} rounds are enumerated, got {rounds}")));
        }
        if !lambda.is_finite() || lambda.abs() >= T::one() {
            return Err(GkpError::invalid("lambda", format!("need |lambda| < 1, got {lambda}")));
        }
        Ok(Self { lambda, rounds })
    }

    /// Single-round simple circuit (`λ = 0`).
    pub fn simple() -> Self {
        Self {
            lambda: T::zero(),
            rounds: 1,
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lambda.abs() > lit(LAMBDA_WARN) {
            out.push(format!("|lambda| = {} is outside the small-interaction regime", self.lambda.abs()));
        }
        out
    }
}

/// Kraus operators of one readout round on a fixed Fock space.
#[derive(Debug, Clone)]
pub struct ReadoutCircuit<T: Real> {
    lambda: T,
    kraus: [CMatrix<T>; 2],
}

impl<T: Real> ReadoutCircuit<T> {
    pub fn new(space: &FockSpace<T>, lambda: T) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(GkpError::invalid("lambda", format!("must be finite, got {lambda}")));
        }
        let theta = T::PI().sqrt() * lit::<T>(0.5);
        let xs = space.x_spectrum();
        let ps = space.p_spectrum();
        let cos_x = xs.function(|x| creal((theta * x).cos()));
        let sin_x = xs.function(|x| creal((theta * x).sin()));
        let i = cplx(T::zero(), T::one());
        let kraus = if lambda == T::zero() {
            [cos_x, sin_x * i]
        } else {
            let cos_p = ps.function(|p| creal((lambda * p).cos()));
            let sin_p = ps.function(|p| creal((lambda * p).sin()));
            let k0 = matmul(&cos_x, &cos_p) - matmul(&sin_x, &sin_p) * i;
            let k1 = matmul(&sin_x, &cos_p) * i - matmul(&cos_x, &sin_p);
            [k0, k1]
        };
        Ok(Self { lambda, kraus })
    }

    /// Circuit without the `P σ_y` gate.
    pub fn simple(space: &FockSpace<T>) -> Result<Self> {
        Self::new(space, T::zero())
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    /// Kraus operator for qubit outcome `q`.
    pub fn kraus(&self, q: usize) -> &CMatrix<T> {
        &self.kraus[q]
    }

    pub fn kraus_op(&self, space: &FockSpace<T>, q: usize) -> Result<LinearOp<T>> {
        LinearOp::new(self.kraus[q].clone(), space.spec(), Space::Oscillator)
    }

    /// `max |K₀†K₀ + K₁†K₁ − I|`.
    pub fn completeness_defect(&self) -> T {
        let d = self.dim();
        let sum = self.kraus[0].ad_mul(&self.kraus[0]) + self.kraus[1].ad_mul(&self.kraus[1]);
        let diff = sum - CMatrix::<T>::identity(d, d);
        diff.iter().fold(T::zero(), |m, z| {
            let a = z.modulus();
            if a > m {
                a
            } else {
                m
            }
        })
    }

    /// One round on `state`: outcome probabilities and normalised post-states.
    pub fn run(&self, state: &OscillatorState<T>) -> Result<SingleShot<T>> {
        if state.dim() != self.dim() {
            return Err(GkpError::DimensionMismatch {
                expected: self.dim(),
                found: state.dim(),
            });
        }
        let weight = state.weight();
        let mut probabilities = [T::zero(); 2];
        let mut post: [Option<OscillatorState<T>>; 2] = [None, None];
        for q in 0..2 {
            let k = &self.kraus[q];
            let (p, unnormalised) = match state {
                OscillatorState::Pure(ket) => {
                    let v = k * ket.amplitudes();
                    let p = v.norm_squared() / weight;
                    (p, OscillatorState::Pure(OscillatorKet::new(v)?))
                }
                OscillatorState::Mixed(rho) => {
                    let m = matmul_adj_right(&matmul(k, rho.matrix()), k);
                    let r = DensityOp::new(m)?;
                    let p = r.trace() / weight;
                    (p, OscillatorState::Mixed(r))
                }
            };
            probabilities[q] = p;
            post[q] = if p > T::zero() { Some(normalise(unnormalised)?) } else { None };
        }
        Ok(SingleShot { probabilities, post })
    }

    /// Post-circuit oscillator state before the qubit is measured.
    pub fn reduced_state(&self, state: &OscillatorState<T>) -> Result<DensityOp<T>> {
        let rho = state.to_density();
        let mut acc = CMatrix::<T>::zeros(self.dim(), self.dim());
        for k in &self.kraus {
            acc += matmul_adj_right(&matmul(k, rho.matrix()), k);
        }
        DensityOp::new(acc)
    }
}

fn normalise<T: Real>(state: OscillatorState<T>) -> Result<OscillatorState<T>> {
    Ok(match state {
        OscillatorState::Pure(k) => OscillatorState::Pure(k.normalize()?),
        OscillatorState::Mixed(r) => OscillatorState::Mixed(r.normalize()?),
    })
}

/// Result of one readout round, indexed by qubit outcome.
#[derive(Debug, Clone)]
pub struct SingleShot<T: Real> {
    pub probabilities: [T; 2],
    /// `None` for a zero-probability outcome.
    pub post: [Option<OscillatorState<T>>; 2],
}

impl<T: Real> SingleShot<T> {
    pub fn probability_of(&self, bit: LogicalBit) -> T {
        self.probabilities[logical_to_outcome(bit)]
    }
}

/// One round of the readout circuit with interaction strength `lambda`.
pub fn run_readout_once<T: Real>(space: &FockSpace<T>, state: &OscillatorState<T>, lambda: T) -> Result<SingleShot<T>> {
    ReadoutCircuit::new(space, lambda)?.run(state)
}

/// One leaf of the multi-round outcome tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub input: LogicalBit,
    /// Logical readings of successive rounds, e.g. `"010"`.
    pub outcomes: String,
    pub probability: f64,
    pub decision: LogicalBit,
    /// Effective squeezing of the final post-measurement state.
    pub delta_eff: Option<f64>,
}

/// Error probabilities of a (possibly multi-round) readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutOutcome {
    pub lambda: f64,
    pub rounds: usize,
    pub p_1_given_0: f64,
    pub p_0_given_1: f64,
    pub p_err: f64,
    pub branches: Vec<BranchRecord>,
}

impl ReadoutOutcome {
    /// Total branch probability for one input; 1 up to rounding.
    pub fn branch_total(&self, input: LogicalBit) -> f64 {
        self.branches.iter().filter(|b| b.input == input).map(|b| b.probability).sum()
    }

    pub fn branches_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.branches).map_err(|e| GkpError::invalid("branches", e.to_string()))
    }
}

/// Options for branch enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchOptions {
    /// Compute `Δ_eff` of every leaf state.
    pub leaf_delta_eff: bool,
}

impl Default for BranchOptions {
    fn default() -> Self {
        Self { leaf_delta_eff: true }
    }
}

struct Walk<'a, T: Real> {
    space: &'a FockSpace<T>,
    circuit: &'a ReadoutCircuit<T>,
    rounds: usize,
    input: LogicalBit,
    options: BranchOptions,
    leaves: Vec<BranchRecord>,
}

impl<T: Real> Walk<'_, T> {
    fn visit(&mut self, state: Option<&OscillatorState<T>>, prefix: &mut String, probability: f64) -> Result<()> {
        if prefix.len() == self.rounds {
            let ones = prefix.bytes().filter(|&b| b == b'1').count();
            let decision = if 2 * ones > self.rounds { LogicalBit::One } else { LogicalBit::Zero };
            let delta_eff = match (state, self.options.leaf_delta_eff) {
                (Some(s), true) => Some(to_f64(effective_squeezing(self.space, s)?)),
                _ => None,
            };
            self.leaves.push(BranchRecord {
                input: self.input,
                outcomes: prefix.clone(),
                probability,
                decision,
                delta_eff,
            });
            return Ok(());
        }
        let shot = match state {
            Some(s) => Some(self.circuit.run(s)?),
            None => None,
        };
        // Children in outcome-string order so the record list is sorted.
        for bit in LogicalBit::both() {
            let q = logical_to_outcome(bit);
            let (p, next) = match &shot {
                Some(s) => (to_f64(s.probabilities[q]), s.post[q].as_ref()),
                None => (0.0, None),
            };
            prefix.push(if bit == LogicalBit::Zero { '0' } else { '1' });
            self.visit(next, prefix, probability * p)?;
            prefix.pop();
        }
        Ok(())
    }
}

/// Enumerates all `2^R` outcome strings for `state`. Between rounds the
/// qubit is measured, discarded and re-prepared in `|0⟩`.
pub fn enumerate_branches<T: Real>(
    space: &FockSpace<T>,
    circuit: &ReadoutCircuit<T>,
    state: &OscillatorState<T>,
    input: LogicalBit,
    rounds: usize,
    options: BranchOptions,
) -> Result<Vec<BranchRecord>> {
    let mut walk = Walk {
        space,
        circuit,
        rounds,
        input,
        options,
        leaves: Vec::with_capacity(1 << rounds),
    };
    walk.visit(Some(state), &mut String::with_capacity(rounds), 1.0)?;
    Ok(walk.leaves)
}

/// Readout error probability `½(p(1|0) + p(0|1))` for a pair of code states.
pub fn simulated_p_err<T: Real>(space: &FockSpace<T>, pair: &GkpStatePair<T>, params: CircuitParams<T>) -> Result<ReadoutOutcome> {
    simulated_p_err_with(space, pair, params, BranchOptions::default())
}

pub fn simulated_p_err_with<T: Real>(
    space: &FockSpace<T>,
    pair: &GkpStatePair<T>,
    params: CircuitParams<T>,
    options: BranchOptions,
) -> Result<ReadoutOutcome> {
    let params = CircuitParams::new(params.lambda, params.rounds)?;
    let circuit = ReadoutCircuit::new(space, params.lambda)?;
    let mut branches = Vec::with_capacity(2 << params.rounds);
    let mut wrong = [0.0f64; 2];
    for input in LogicalBit::both() {
        let leaves = enumerate_branches(space, &circuit, pair.get(input), input, params.rounds, options)?;
        wrong[input.index()] = leaves.iter().filter(|b| b.decision != input).map(|b| b.probability).sum();
        branches.extend(leaves);
    }
    Ok(ReadoutOutcome {
        lambda: to_f64(params.lambda),
        rounds: params.rounds,
        p_1_given_0: wrong[0],
        p_0_given_1: wrong[1],
        p_err: 0.5 * (wrong[0] + wrong[1]),
        branches,
    })
}

/// Single-round error probability alone; the cheap path for optimisers.
pub fn single_round_p_err<T: Real>(space: &FockSpace<T>, pair: &GkpStatePair<T>, lambda: T) -> Result<T> {
    let circuit = ReadoutCircuit::new(space, lambda)?;
    let p10 = circuit.run(&pair.zero)?.probability_of(LogicalBit::One);
    let p01 = circuit.run(&pair.one)?.probability_of(LogicalBit::Zero);
    Ok((p10 + p01) * lit::<T>(0.5))
}

/// Single-round error probability of a fixed pair as a function of `λ`.
///
/// In the eigenbasis of `P` the factors `cos(λP)`, `sin(λP)` are diagonal, so
/// with `S = sin(θX)`, `C = cos(θX)`, `Q = SC` (all λ-independent)
///
/// ```text
/// K₁†K₁ = c S² c + s C² s + i(c Q s − s Q c)
/// K₀†K₀ = c C² c + s S² s − i(c Q s − s Q c)
/// ```
///
/// and each probability is a quadratic form in `(c, s)` that costs `O(N²)`
/// once the state-dependent matrices are stored.
#[derive(Debug, Clone)]
pub struct ErrorLandscape<T: Real> {
    momenta: Vec<T>,
    /// Per input bit: `A ∘ ρ̃ᵀ` for the three operators of its wrong outcome.
    terms: [[CMatrix<T>; 3]; 2],
}

impl<T: Real> ErrorLandscape<T> {
    pub fn new(space: &FockSpace<T>, pair: &GkpStatePair<T>) -> Result<Self> {
        let theta = T::PI().sqrt() * lit::<T>(0.5);
        let xs = space.x_spectrum();
        let v = space.p_spectrum().vectors();
        let to_p = |m: CMatrix<T>| matmul(&v.adjoint(), &matmul(&m, v));
        let s2 = to_p(xs.function(|x| creal((theta * x).sin().powi(2))));
        let c2 = to_p(xs.function(|x| creal((theta * x).cos().powi(2))));
        let q = to_p(xs.function(|x| creal((theta * x).sin() * (theta * x).cos())));
        let mut terms: [[CMatrix<T>; 3]; 2] = Default::default();
        for input in LogicalBit::both() {
            let state = pair.get(input);
            if state.dim() != v.nrows() {
                return Err(GkpError::DimensionMismatch {
                    expected: v.nrows(),
                    found: state.dim(),
                });
            }
            let rho = to_p(state.to_density().into_matrix()) / creal(state.weight());
            let ops = if logical_to_outcome(input.flipped()) == 1 {
                [&s2, &c2, &q]
            } else {
                [&c2, &s2, &q]
            };
            let sign = if logical_to_outcome(input.flipped()) == 1 { T::one() } else { -T::one() };
            for (k, a) in ops.into_iter().enumerate() {
                let mut f = a.component_mul(&rho.transpose());
                if k == 2 {
                    f *= creal(sign);
                }
                terms[input.index()][k] = f;
            }
        }
        Ok(Self {
            momenta: space.p_spectrum().values().iter().copied().collect(),
            terms,
        })
    }

    /// Probability that `input` is misread after one round.
    pub fn wrong(&self, input: LogicalBit, lambda: T) -> T {
        let c: Vec<T> = self.momenta.iter().map(|&p| (lambda * p).cos()).collect();
        let s: Vec<T> = self.momenta.iter().map(|&p| (lambda * p).sin()).collect();
        let [fs, fc, fq] = &self.terms[input.index()];
        let n = c.len();
        let mut total = T::zero();
        for j in 0..n {
            for i in 0..n {
                let cross = c[i] * s[j] - s[i] * c[j];
                // i·cross·F_Q contributes −cross·Im F_Q to the real part.
                total += c[i] * c[j] * fs[(i, j)].re + s[i] * s[j] * fc[(i, j)].re - cross * fq[(i, j)].im;
            }
        }
        total
    }

    pub fn p_err(&self, lambda: T) -> T {
        (self.wrong(LogicalBit::Zero, lambda) + self.wrong(LogicalBit::One, lambda)) * lit::<T>(0.5)
    }
}

/// Position grid for simulated homodyne detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomodyneGrid {
    /// Integration covers `|x| ≤ x_max`.
    pub x_max: f64,
    /// Simpson intervals per decision bin (even).
    pub intervals_per_bin: usize,
    /// Absolute agreement required with the half-resolution result; a
    /// relative 1e-6 is always accepted.
    pub tolerance: f64,
}

impl HomodyneGrid {
    /// `|x| ≤ κ√(2π) + 6` with 1024 intervals per bin.
    pub fn for_kappa(kappa: f64) -> Self {
        Self {
            x_max: kappa * (2.0 * std::f64::consts::PI).sqrt() + 6.0,
            intervals_per_bin: 1024,
            tolerance: 1e-12,
        }
    }
}

/// Hermite functions `φ_0..φ_N` at `x`, with running rescaling so that
/// neither the Gaussian factor nor the recurrence under/overflows.
fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    let log_phi0 = -0.25 * std::f64::consts::PI.ln() - 0.5 * x * x;
    let mut log_scale = log_phi0;
    let (mut prev, mut cur) = (0.0f64, 1.0f64);
    let mut scaled = vec![0.0; count];
    let mut scales = vec![0.0; count];
    for n in 0..count {
        scaled[n] = cur;
        scales[n] = log_scale;
        let next = (2.0 / (n + 1) as f64).sqrt() * x * cur - (n as f64 / (n + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > 1e150 {
            prev /= m;
            cur /= m;
            log_scale += m.ln();
        }
    }
    for n in 0..count {
        let l = scales[n];
        out[n] = if l < -700.0 { 0.0 } else { scaled[n] * l.exp() };
    }
    out
}

/// Position density `⟨x|ρ|x⟩` of `state` at each point of `xs`.
pub fn position_density<T: Real>(state: &OscillatorState<T>, xs: &[f64]) -> Vec<f64> {
    let d = state.dim();
    let phi = DMatrix::<f64>::from_fn(xs.len(), d, |_, _| 0.0);
    let mut phi = phi;
    for (i, &x) in xs.iter().enumerate() {
        for (n, v) in hermite_functions(x, d).into_iter().enumerate() {
            phi[(i, n)] = v;
        }
    }
    let weight = to_f64(state.weight());
    match state {
        OscillatorState::Pure(k) => {
            let c: Vec<Complex<f64>> = k.amplitudes().iter().map(|z| Complex::new(to_f64(z.re), to_f64(z.im))).collect();
            (0..xs.len())
                .map(|i| {
                    let mut acc = Complex::new(0.0, 0.0);
                    for n in 0..d {
                        acc += c[n] * phi[(i, n)];
                    }
                    acc.norm_sqr() / weight
                })
                .collect()
        }
        OscillatorState::Mixed(r) => {
            let rho = CMatrix::<f64>::from_fn(d, d, |i, j| {
                let z = r.matrix()[(i, j)];
                Complex::new(to_f64(z.re), to_f64(z.im))
            });
            let phi_c = phi.map(|v| Complex::new(v, 0.0));
            let m = matmul(&phi_c, &rho);
            (0..xs.len())
                .map(|i| {
                    let mut acc = 0.0;
                    for n in 0..d {
                        acc += (m[(i, n)] * phi[(i, n)]).re;
                    }
                    acc / weight
                })
                .collect()
        }
    }
}

/// Probability that nearest-lattice-point binning of `x` reports `!mu`
/// (bins centred on multiples of `√π`, even for 0 and odd for 1).
fn misclassification<T: Real>(state: &OscillatorState<T>, mu: LogicalBit, x_max: f64, intervals: usize) -> f64 {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let k_max = (x_max / sqrt_pi + 0.5).ceil() as i64;
    let n = intervals + intervals % 2;
    let mut total = 0.0;
    for k in -k_max..=k_max {
        if (k - mu.index() as i64).rem_euclid(2) == 0 {
            continue;
        }
        let a = (k as f64 - 0.5) * sqrt_pi;
        let h = sqrt_pi / n as f64;
        let xs: Vec<f64> = (0..=n).map(|j| a + h * j as f64).collect();
        let f = position_density(state, &xs);
        let mut s = f[0] + f[n];
        for j in 1..n {
            s += if j % 2 == 1 { 4.0 * f[j] } else { 2.0 * f[j] };
        }
        total += s * h / 3.0;
    }
    total
}

/// Simulated ideal homodyne readout: `½(p(1|0) + p(0|1))` from the exact
/// position distributions, binned to the nearest multiple of `√π`.
pub fn homodyne_p_err_numeric<T: Real>(pair: &GkpStatePair<T>, grid: HomodyneGrid) -> Result<f64> {
    if !(grid.x_max > 0.0) || grid.intervals_per_bin < 4 {
        return Err(GkpError::invalid("grid", "need x_max > 0 and at least 4 intervals per bin"));
    }
    let eval = |intervals: usize| {
        0.5 * (misclassification(&pair.zero, LogicalBit::Zero, grid.x_max, intervals)
            + misclassification(&pair.one, LogicalBit::One, grid.x_max, intervals))
    };
    let coarse = eval(grid.intervals_per_bin / 2);
    let fine = eval(grid.intervals_per_bin);
    if (fine - coarse).abs() > grid.tolerance.max(1e-6 * fine.abs()) {
        return Err(GkpError::NotConverged {
            what: "homodyne integration",
            detail: format!("half-resolution change {:.3e}", (fine - coarse).abs()),
        });
    }
    Ok(fine)
}

/// Human-readable table of branch records.
pub fn format_branches(branches: &[BranchRecord]) -> String {
    let mut s = String::new();
    for b in branches {
        let _ = writeln!(
            s,
            "{:?} {} p={:.6e} -> {:?} delta_eff={}",
            b.input,
            b.outcomes,
            b.probability,
            b.decision,
            b.delta_eff.map_or("-".to_string(), |d| format!("{d:.4}"))
        );
    }
    s
}
