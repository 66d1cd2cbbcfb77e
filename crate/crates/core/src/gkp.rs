//! Approximate GKP code states, the Gaussian displacement channel, and the
//! state metrics built on them (purity, effective squeezing, Helstrom bound).

use std::sync::Arc;

use nalgebra::{Complex, ComplexField};
use serde::{Deserialize, Serialize};

use crate::analytics::helstrom_formula;
use crate::error::{GkpError, Result};
use crate::fock::{phase, DensityOp, FockSpace, HilbertSpec, LinearOp, OscillatorKet, QuantumState, SpaceCache};
use crate::quadrature::GaussHermite;
use crate::scalar::{creal, lit, matmul, matmul_adj_right, to_f64, CMatrix, CVector, Real};

/// Peaks whose envelope weight falls below this fraction of the largest are dropped.
pub const ENVELOPE_FLOOR: f64 = 1e-12;
/// Hard limit on the number of lattice peaks in one code state.
pub const MAX_PEAKS: usize = 4001;

/// Logical value of a GKP basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LogicalBit {
    Zero,
    One,
}

impl LogicalBit {
    pub fn index(self) -> usize {
        match self {
            LogicalBit::Zero => 0,
            LogicalBit::One => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            LogicalBit::Zero => LogicalBit::One,
            LogicalBit::One => LogicalBit::Zero,
        }
    }

    pub fn both() -> [LogicalBit; 2] {
        [LogicalBit::Zero, LogicalBit::One]
    }
}

/// `Δ_dB = −10 log₁₀(Δ²)`.
pub fn delta_db<T: Real>(delta: T) -> T {
    -lit::<T>(10.0) * (delta * delta).log10()
}

/// Inverse of [`delta_db`].
pub fn db_to_delta<T: Real>(db: T) -> T {
    lit::<T>(10.0).powf(-db / lit::<T>(20.0))
}

/// Parameters of one (possibly mixed) approximate GKP basis state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkpSpec<T> {
    pub mu: LogicalBit,
    /// Peak width Δ.
    pub delta: T,
    /// Envelope width κ.
    pub kappa: T,
    /// Gaussian displacement channel strength σ (0 for a pure state).
    pub sigma: T,
}

impl<T: Real> GkpSpec<T> {
    pub fn new(mu: LogicalBit, delta: T, kappa: T, sigma: T) -> Result<Self> {
        if !(delta > T::zero() && delta < T::one()) {
            return Err(GkpError::invalid("delta", format!("must lie in (0, 1), got {delta}")));
        }
        if !(kappa >= T::one()) || !kappa.is_finite() {
            return Err(GkpError::invalid("kappa", format!("must be finite and >= 1, got {kappa}")));
        }
        if !(sigma >= T::zero()) || !sigma.is_finite() {
            return Err(GkpError::invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { mu, delta, kappa, sigma })
    }

    /// Pure state with `κ = 1/Δ`.
    pub fn symmetric(mu: LogicalBit, delta: T) -> Result<Self> {
        Self::new(mu, delta, T::one() / delta, T::zero())
    }

    pub fn with_mu(self, mu: LogicalBit) -> Self {
        Self { mu, ..self }
    }

    pub fn with_sigma(self, sigma: T) -> Result<Self> {
        Self::new(self.mu, self.delta, self.kappa, sigma)
    }

    pub fn delta_db(&self) -> T {
        delta_db(self.delta)
    }

    /// `√(Δ² + 2σ²)`, the effective squeezing the channel should produce.
    pub fn predicted_delta_eff(&self) -> T {
        (self.delta * self.delta + lit::<T>(2.0) * self.sigma * self.sigma).sqrt()
    }

    pub fn is_pure(&self) -> bool {
        self.sigma == T::zero()
    }

    /// Lattice indices `m` (peak at `α = √(π/2)·m`) whose envelope weight
    /// `e^{−α²/κ²}` is at least [`ENVELOPE_FLOOR`] of the largest one.
    pub fn peak_indices(&self, extra: usize) -> Result<Vec<i64>> {
        let half_pi = T::FRAC_PI_2();
        let kappa2 = self.kappa * self.kappa;
        let offset = self.mu.index() as i64;
        let log_floor = lit::<T>(ENVELOPE_FLOOR.ln());
        let exponent = |m: i64| -half_pi * lit::<T>((m * m) as f64) / kappa2;
        let reference = exponent(offset);
        // Largest |m| of the right parity whose weight clears the floor.
        let mut top = offset;
        while exponent(top + 2) - reference >= log_floor {
            top += 2;
            if top as usize > MAX_PEAKS {
                return Err(GkpError::NotConverged {
                    what: "GKP envelope",
                    detail: format!("more than {MAX_PEAKS} peaks above the weight floor (kappa = {})", self.kappa),
                });
            }
        }
        let top = top + 2 * extra as i64;
        Ok((-top..=top).filter(|m| (m - offset).rem_euclid(2) == 0).collect())
    }
}

/// A pure or mixed oscillator state.
#[derive(Debug, Clone, PartialEq)]
pub enum OscillatorState<T: Real> {
    Pure(OscillatorKet<T>),
    Mixed(DensityOp<T>),
}

impl<T: Real> OscillatorState<T> {
    pub fn dim(&self) -> usize {
        match self {
            OscillatorState::Pure(k) => k.dim(),
            OscillatorState::Mixed(r) => r.dim(),
        }
    }

    pub fn to_density(&self) -> DensityOp<T> {
        match self {
            OscillatorState::Pure(k) => k.to_density(),
            OscillatorState::Mixed(r) => r.clone(),
        }
    }

    pub fn as_ket(&self) -> Option<&OscillatorKet<T>> {
        match self {
            OscillatorState::Pure(k) => Some(k),
            OscillatorState::Mixed(_) => None,
        }
    }

    pub fn is_pure_representation(&self) -> bool {
        matches!(self, OscillatorState::Pure(_))
    }

    pub fn purity(&self) -> T {
        match self {
            OscillatorState::Pure(k) => {
                let n = k.norm_sqr_total();
                n * n
            }
            OscillatorState::Mixed(r) => r.purity(),
        }
    }

    /// Norm squared (pure) or trace (mixed).
    pub fn weight(&self) -> T {
        match self {
            OscillatorState::Pure(k) => k.norm_sqr_total(),
            OscillatorState::Mixed(r) => r.trace(),
        }
    }

    pub fn leakage(&self) -> f64 {
        match self {
            OscillatorState::Pure(k) => k.leakage(),
            OscillatorState::Mixed(r) => r.leakage(),
        }
    }

    pub fn is_converged(&self) -> bool {
        self.leakage() < crate::fock::LEAKAGE_THRESHOLD
    }

    pub fn expectation(&self, op: &LinearOp<T>) -> Result<Complex<T>> {
        match self {
            OscillatorState::Pure(k) => k.expectation(op),
            OscillatorState::Mixed(r) => r.expectation(op),
        }
    }

    /// Diagonal of the state in the eigenbasis of `spectrum`:
    /// the outcome distribution of measuring that observable.
    pub fn populations_in(&self, spectrum: &crate::fock::Spectrum<T>) -> Vec<T> {
        match self {
            OscillatorState::Pure(k) => {
                let c = spectrum.vectors().ad_mul(k.amplitudes());
                c.iter().map(|z| z.norm_sqr()).collect()
            }
            OscillatorState::Mixed(r) => {
                let v = spectrum.vectors();
                let rv = matmul(r.matrix(), v);
                (0..v.ncols())
                    .map(|j| v.column(j).dotc(&rv.column(j)).re)
                    .collect()
            }
        }
    }
}

impl<T: Real> From<OscillatorKet<T>> for OscillatorState<T> {
    fn from(k: OscillatorKet<T>) -> Self {
        OscillatorState::Pure(k)
    }
}

impl<T: Real> From<DensityOp<T>> for OscillatorState<T> {
    fn from(r: DensityOp<T>) -> Self {
        OscillatorState::Mixed(r)
    }
}

trait NormSqr<T> {
    fn norm_sqr_total(&self) -> T;
}

impl<T: Real> NormSqr<T> for OscillatorKet<T> {
    fn norm_sqr_total(&self) -> T {
        self.amplitudes().norm_squared()
    }
}

/// Superposes `D(√(π/2) m) S_Δ|vac⟩` over `peaks` with envelope weights.
fn superpose_peaks<T: Real>(space: &FockSpace<T>, spec: &GkpSpec<T>, peaks: &[i64]) -> Result<OscillatorKet<T>> {
    let squeezed = space.squeezed_vacuum(spec.delta)?;
    // All peaks share the squeezed vacuum; displacements along X are diagonal
    // in the P eigenbasis: D(a) = exp(−i√2 a P).
    let p_spec = space.p_spectrum();
    let coords = p_spec.vectors().ad_mul(squeezed.amplitudes());
    let root_half_pi = T::FRAC_PI_2().sqrt();
    let kappa2 = spec.kappa * spec.kappa;
    let reference = peaks
        .iter()
        .map(|&m| m.abs())
        .min()
        .map(|m| lit::<T>((m * m) as f64))
        .unwrap_or(T::zero());
    let mut acc = CVector::<T>::zeros(space.dim());
    for &m in peaks {
        let alpha = root_half_pi * lit::<T>(m as f64);
        // Weight relative to the central peak; normalisation absorbs the rest.
        let weight = (-(alpha * alpha - T::FRAC_PI_2() * reference) / kappa2).exp();
        let shift = -T::SQRT_2() * alpha;
        for (j, &p) in p_spec.values().iter().enumerate() {
            acc[j] += coords[j] * phase(shift * p) * creal(weight);
        }
    }
    let amplitudes = p_spec.vectors() * acc;
    let ket = OscillatorKet::new(amplitudes)?.normalize()?;
    if !ket.is_converged() {
        return Err(GkpError::Truncation {
            leakage: ket.leakage(),
            cutoff: space.cutoff(),
            threshold: crate::fock::LEAKAGE_THRESHOLD,
        });
    }
    Ok(ket)
}

/// Pure approximate GKP basis state `|μ̃⟩` for a spec with `σ = 0`.
pub fn make_pure_gkp<T: Real>(space: &FockSpace<T>, spec: &GkpSpec<T>) -> Result<OscillatorKet<T>> {
    make_pure_gkp_with_extra_peaks(space, spec, 0)
}

/// As [`make_pure_gkp`] with `extra` additional peaks on each side.
pub fn make_pure_gkp_with_extra_peaks<T: Real>(space: &FockSpace<T>, spec: &GkpSpec<T>, extra: usize) -> Result<OscillatorKet<T>> {
    if !spec.is_pure() {
        return Err(GkpError::invalid("sigma", "pure GKP construction needs sigma = 0"));
    }
    let peaks = spec.peak_indices(extra)?;
    superpose_peaks(space, spec, &peaks)
}

/// Pure or mixed GKP state for `spec` (the channel is applied when `σ > 0`).
pub fn make_gkp<T: Real>(space: &FockSpace<T>, spec: &GkpSpec<T>) -> Result<OscillatorState<T>> {
    let pure = make_pure_gkp(space, &GkpSpec { sigma: T::zero(), ..*spec })?;
    if spec.is_pure() {
        return Ok(OscillatorState::Pure(pure));
    }
    let rho = gaussian_displacement_channel(space, &OscillatorState::Pure(pure), spec.sigma, ChannelOptions::default())?;
    Ok(OscillatorState::Mixed(rho))
}

/// Both logical basis states under one set of parameters.
#[derive(Debug, Clone)]
pub struct GkpStatePair<T: Real> {
    pub zero: OscillatorState<T>,
    pub one: OscillatorState<T>,
    pub spec: GkpSpec<T>,
}

impl<T: Real> GkpStatePair<T> {
    pub fn new(space: &FockSpace<T>, delta: T, kappa: T, sigma: T) -> Result<Self> {
        let spec = GkpSpec::new(LogicalBit::Zero, delta, kappa, sigma)?;
        Self::from_spec(space, spec)
    }

    pub fn symmetric(space: &FockSpace<T>, delta: T) -> Result<Self> {
        Self::new(space, delta, T::one() / delta, T::zero())
    }

    pub fn from_spec(space: &FockSpace<T>, spec: GkpSpec<T>) -> Result<Self> {
        let zero = make_gkp(space, &spec.with_mu(LogicalBit::Zero))?;
        let one = make_gkp(space, &spec.with_mu(LogicalBit::One))?;
        Ok(Self {
            zero,
            one,
            spec: spec.with_mu(LogicalBit::Zero),
        })
    }

    pub fn get(&self, mu: LogicalBit) -> &OscillatorState<T> {
        match mu {
            LogicalBit::Zero => &self.zero,
            LogicalBit::One => &self.one,
        }
    }

    pub fn is_pure(&self) -> bool {
        self.zero.is_pure_representation() && self.one.is_pure_representation()
    }

    pub fn is_converged(&self) -> bool {
        self.zero.is_converged() && self.one.is_converged()
    }

    pub fn cutoff(&self) -> usize {
        self.zero.dim() - 1
    }
}

/// Quadrature settings for the Gaussian displacement channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelOptions {
    /// Gauss–Hermite nodes per quadrature axis.
    pub nodes: usize,
    /// Upper limit for the node count while refining.
    pub max_nodes: usize,
    /// Required stability of `Tr(ρ²)` between refinements.
    pub purity_tolerance: f64,
}

impl Default for ChannelOptions {
    fn default() -> Self {
        Self {
            nodes: 21,
            max_nodes: 321,
            purity_tolerance: 1e-6,
        }
    }
}

/// Averages `e^{i c (λ_i − λ_j)}` over the quadrature in the eigenbasis of a
/// quadrature, i.e. applies a random displacement along the conjugate axis.
fn dephase<T: Real>(rho: &CMatrix<T>, spectrum: &crate::fock::Spectrum<T>, rule: &GaussHermite<T>, sigma: T) -> CMatrix<T> {
    let v = spectrum.vectors();
    let mut in_basis = matmul(&v.adjoint(), &matmul(rho, v));
    let values = spectrum.values();
    let n = values.len();
    // Re α ~ N(0, σ²/2): α = σ t under the weight e^{−t²}.
    let shift = T::SQRT_2() * sigma;
    let norm = T::PI().sqrt();
    for j in 0..n {
        for i in 0..n {
            let gap = shift * (values[i] - values[j]);
            let factor = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .fold(T::zero(), |acc, (&t, &w)| acc + w * (gap * t).cos())
                / norm;
            in_basis[(i, j)] *= creal(factor);
        }
    }
    matmul_adj_right(&matmul(v, &in_basis), v)
}

fn apply_channel_once<T: Real>(space: &FockSpace<T>, rho: &CMatrix<T>, sigma: T, nodes: usize) -> Result<CMatrix<T>> {
    let rule = GaussHermite::new(nodes)?;
    // D(a + ib) = D(a) D(ib) up to a phase, and the Gaussian weight factorises,
    // so the 2-D average is an X-basis dephasing followed by a P-basis one.
    let after_x = dephase(rho, space.x_spectrum(), &rule, sigma);
    Ok(dephase(&after_x, space.p_spectrum(), &rule, sigma))
}

/// `ρ ↦ (1/πσ²) ∫ d²α e^{−|α|²/σ²} D(α) ρ D(α)†` on a truncated Fock space.
pub fn gaussian_displacement_channel<T: Real>(
    space: &FockSpace<T>,
    state: &OscillatorState<T>,
    sigma: T,
    options: ChannelOptions,
) -> Result<DensityOp<T>> {
    if state.dim() != space.dim() {
        return Err(GkpError::DimensionMismatch {
            expected: space.dim(),
            found: state.dim(),
        });
    }
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(GkpError::invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    let rho = state.to_density();
    if sigma == T::zero() {
        return Ok(rho);
    }
    let mut nodes = options.nodes.max(1);
    let mut current = apply_channel_once(space, rho.matrix(), sigma, nodes)?;
    let mut current_purity = DensityOp::new(current.clone())?.purity();
    loop {
        let refined_nodes = 2 * nodes + 1;
        if refined_nodes > options.max_nodes {
            return Err(GkpError::NotConverged {
                what: "displacement-channel quadrature",
                detail: format!("purity unstable at {nodes} nodes per axis"),
            });
        }
        let refined = apply_channel_once(space, rho.matrix(), sigma, refined_nodes)?;
        let refined_purity = DensityOp::new(refined.clone())?.purity();
        if to_f64((refined_purity - current_purity).abs()) <= options.purity_tolerance {
            let out = DensityOp::new(hermitize(refined))?;
            return Ok(out);
        }
        nodes = refined_nodes;
        current = refined;
        current_purity = refined_purity;
        let _ = &current;
    }
}

fn hermitize<T: Real>(m: CMatrix<T>) -> CMatrix<T> {
    (&m + m.adjoint()) * creal(lit::<T>(0.5))
}

/// `⟨exp(i c X)⟩`, evaluated in the eigenbasis of `X`.
pub fn x_phase_expectation<T: Real>(space: &FockSpace<T>, state: &OscillatorState<T>, c: T) -> Result<Complex<T>> {
    if state.dim() != space.dim() {
        return Err(GkpError::DimensionMismatch {
            expected: space.dim(),
            found: state.dim(),
        });
    }
    let pops = state.populations_in(space.x_spectrum());
    let mut acc = Complex::new(T::zero(), T::zero());
    for (w, &x) in pops.iter().zip(space.x_spectrum().values().iter()) {
        acc += phase(c * x) * creal(*w);
    }
    Ok(acc / creal(state.weight()))
}

/// `⟨D(iβ)⟩ = ⟨exp(i√2 β X)⟩`.
pub fn imaginary_displacement_expectation<T: Real>(space: &FockSpace<T>, state: &OscillatorState<T>, beta: T) -> Result<Complex<T>> {
    x_phase_expectation(space, state, T::SQRT_2() * beta)
}

/// Logical Z expectation `⟨D(i√(π/2))⟩ = ⟨e^{i√π X}⟩`.
pub fn logical_z_expectation<T: Real>(space: &FockSpace<T>, state: &OscillatorState<T>) -> Result<Complex<T>> {
    imaginary_displacement_expectation(space, state, T::FRAC_PI_2().sqrt())
}

/// Stabilizer expectation `⟨D(i√(2π))⟩ = ⟨e^{2i√π X}⟩`.
pub fn stabilizer_expectation<T: Real>(space: &FockSpace<T>, state: &OscillatorState<T>) -> Result<Complex<T>> {
    imaginary_displacement_expectation(space, state, (T::TAU()).sqrt())
}

/// `Δ_eff` from `|⟨D(i√(2π))⟩|`; `+∞` when the expectation vanishes.
pub fn effective_squeezing_from_expectation<T: Real>(modulus: T) -> T {
    if !(modulus > T::zero()) {
        return T::max_value().map(|m| m * m).unwrap_or(T::one() / T::zero());
    }
    let m = if modulus > T::one() { T::one() } else { modulus };
    let val = (-(m * m).ln()) / T::TAU();
    if val <= T::zero() {
        T::zero()
    } else {
        val.sqrt()
    }
}

/// Effective squeezing `Δ_eff = √((1/2π) ln(1/|⟨D(i√(2π))⟩|²))`.
pub fn effective_squeezing<T: Real>(space: &FockSpace<T>, state: &OscillatorState<T>) -> Result<T> {
    let d = stabilizer_expectation(space, state)?;
    Ok(effective_squeezing_from_expectation(d.modulus()))
}

pub fn effective_squeezing_db<T: Real>(space: &FockSpace<T>, state: &OscillatorState<T>) -> Result<T> {
    let d = effective_squeezing(space, state)?;
    Ok(delta_db(d))
}

/// `Tr(ρ²)`.
pub fn purity<T: Real>(rho: &DensityOp<T>) -> T {
    rho.purity()
}

/// Helstrom error `½(1 − √(1 − |⟨0̃|1̃⟩|²))` for two pure states.
pub fn helstrom_bound<T: Real>(state0: &OscillatorState<T>, state1: &OscillatorState<T>) -> Result<T> {
    match (state0, state1) {
        (OscillatorState::Pure(a), OscillatorState::Pure(b)) => {
            let a = a.normalize()?;
            let b = b.normalize()?;
            helstrom_formula(a.inner(&b)?)
        }
        _ => Err(GkpError::Unsupported("Helstrom bound for mixed states")),
    }
}

/// Result of automatic cutoff selection.
#[derive(Debug, Clone)]
pub struct CutoffChoice<T: Real> {
    pub space: Arc<FockSpace<T>>,
    pub pair: GkpStatePair<T>,
    /// Largest change of a monitored probability between `N` and `2N`.
    pub doubling_change: f64,
}

/// Tolerance of the convergence-in-N check.
pub const CUTOFF_CONVERGENCE: f64 = 1e-8;

fn monitored<T: Real>(space: &FockSpace<T>, pair: &GkpStatePair<T>) -> Result<[f64; 3]> {
    let z0 = to_f64(logical_z_expectation(space, &pair.zero)?.re);
    let z1 = to_f64(logical_z_expectation(space, &pair.one)?.re);
    let p = to_f64(pair.zero.purity());
    Ok([z0, z1, p])
}

/// Doubles the cutoff from `start` until both states pass the leakage check
/// and monitored probabilities move by less than [`CUTOFF_CONVERGENCE`]
/// when the cutoff is doubled once more.
pub fn auto_cutoff<T: Real>(spec: GkpSpec<T>, start: HilbertSpec, max_cutoff: usize, cache: &SpaceCache<T>) -> Result<CutoffChoice<T>> {
    let mut hs = start;
    let mut last_err = None;
    while hs.cutoff() <= max_cutoff {
        let space = cache.get(hs);
        match GkpStatePair::from_spec(&space, spec) {
            Ok(pair) => {
                let finer = hs.doubled();
                let finer_space = cache.get(finer);
                let check = GkpStatePair::from_spec(&finer_space, spec)
                    .and_then(|fine| Ok((monitored(&space, &pair)?, monitored(&finer_space, &fine)?)));
                match check {
                    Ok((coarse, fine)) => {
                        let change = coarse
                            .iter()
                            .zip(&fine)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        if change < CUTOFF_CONVERGENCE {
                            return Ok(CutoffChoice {
                                space,
                                pair,
                                doubling_change: change,
                            });
                        }
                        last_err = Some(GkpError::NotConverged {
                            what: "cutoff",
                            detail: format!("doubling N={} changes probabilities by {change:.3e}", hs.cutoff()),
                        });
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            Err(e) if e.is_convergence_failure() => last_err = Some(e),
            Err(e) => return Err(e),
        }
        hs = hs.doubled();
    }
    Err(last_err.unwrap_or(GkpError::NotConverged {
        what: "cutoff",
        detail: format!("start cutoff {} already above limit {max_cutoff}", start.cutoff()),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize) -> FockSpace<f64> {
        FockSpace::with_cutoff(n).unwrap()
    }

    #[test]
    fn db_round_trip() {
        for d in [0.1, 0.2, 0.3162, 0.5, 0.9] {
            assert!((db_to_delta(delta_db(d)) - d).abs() < 1e-12);
        }
        assert!((delta_db(0.1f64.sqrt()) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(GkpSpec::new(LogicalBit::Zero, 0.0, 2.0, 0.0).is_err());
        assert!(GkpSpec::new(LogicalBit::Zero, 1.0, 2.0, 0.0).is_err());
        assert!(GkpSpec::new(LogicalBit::Zero, 0.3, 0.5, 0.0).is_err());
        assert!(GkpSpec::new(LogicalBit::Zero, 0.3, 2.0, -0.1).is_err());
        let s = GkpSpec::symmetric(LogicalBit::One, 0.25).unwrap();
        assert_eq!(s.kappa, 4.0);
    }

    #[test]
    fn peak_set_respects_envelope_floor() {
        let s = GkpSpec::symmetric(LogicalBit::One, 0.5).unwrap();
        let peaks = s.peak_indices(0).unwrap();
        assert!(peaks.iter().all(|m| m % 2 != 0));
        let w = |m: i64| (-(std::f64::consts::FRAC_PI_2) * (m * m) as f64 / 4.0).exp();
        let w_ref = w(1);
        for &m in &peaks {
            assert!(w(m) / w_ref >= ENVELOPE_FLOOR);
        }
        let last = *peaks.last().unwrap();
        assert!(w(last + 2) / w_ref < ENVELOPE_FLOOR);
    }

    #[test]
    fn pure_state_is_normalised_with_correct_parity() {
        let fs = space(150);
        let d = 0.1f64.sqrt();
        for mu in LogicalBit::both() {
            let spec = GkpSpec::symmetric(mu, d).unwrap();
            let ket = make_pure_gkp(&fs, &spec).unwrap();
            assert!((ket.norm() - 1.0).abs() < 1e-12);
            let z = logical_z_expectation(&fs, &OscillatorState::Pure(ket)).unwrap();
            assert!(z.im.abs() < 1e-6);
            let expected = (-std::f64::consts::PI * d * d / 4.0).exp();
            let sign = if mu == LogicalBit::Zero { 1.0 } else { -1.0 };
            assert!(sign * z.re > 0.0);
            assert!((z.re.abs() / expected - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn pure_state_requires_zero_sigma() {
        let fs = space(60);
        let spec = GkpSpec::new(LogicalBit::Zero, 0.5, 2.0, 0.1).unwrap();
        assert!(make_pure_gkp(&fs, &spec).is_err());
    }

    #[test]
    fn truncation_is_reported() {
        let fs = space(40);
        let spec = GkpSpec::symmetric(LogicalBit::Zero, 0.2).unwrap();
        assert!(matches!(make_pure_gkp(&fs, &spec), Err(GkpError::Truncation { .. })));
    }

    #[test]
    fn effective_squeezing_of_vacuum_is_one() {
        let fs = space(60);
        let vac = OscillatorState::Pure(fs.vacuum());
        let d = effective_squeezing(&fs, &vac).unwrap();
        assert!((d - 1.0).abs() < 1e-10, "{d}");
        assert_eq!(effective_squeezing_from_expectation(1.0f64), 0.0);
        assert!(effective_squeezing_from_expectation(0.0f64) > 1e300);
    }

    #[test]
    fn effective_squeezing_of_pure_state() {
        let fs = space(400);
        let spec = GkpSpec::new(LogicalBit::Zero, 0.2, 5.0, 0.0).unwrap();
        let ket = make_pure_gkp(&fs, &spec).unwrap();
        let d = effective_squeezing(&fs, &OscillatorState::Pure(ket)).unwrap();
        assert!((d - 0.2).abs() < 2e-3, "{d}");
    }

    #[test]
    fn channel_identity_and_trace() {
        let fs = space(120);
        let spec = GkpSpec::symmetric(LogicalBit::Zero, 0.4).unwrap();
        let ket = make_pure_gkp(&fs, &spec).unwrap();
        let st = OscillatorState::Pure(ket.clone());
        let same = gaussian_displacement_channel(&fs, &st, 0.0, ChannelOptions::default()).unwrap();
        assert!(same.max_distance(&ket.to_density()).unwrap() < 1e-15);
        let mixed = gaussian_displacement_channel(&fs, &st, 0.1, ChannelOptions::default()).unwrap();
        assert!((mixed.trace() - 1.0).abs() < 1e-8);
        assert!(mixed.purity() < 1.0);
        mixed.validate().unwrap();
    }

    #[test]
    fn channel_matches_closed_form_dephasing() {
        // Independent route: the quadrature average of cos(√2 σ t Δλ) is the
        // Gaussian characteristic function e^{−σ²Δλ²/2}.
        let fs = space(80);
        let spec = GkpSpec::new(LogicalBit::One, 0.5, 2.0, 0.0).unwrap();
        let st = OscillatorState::Pure(make_pure_gkp(&fs, &spec).unwrap());
        let sigma = 0.15;
        let got = gaussian_displacement_channel(&fs, &st, sigma, ChannelOptions::default()).unwrap();

        let exact_dephase = |rho: &CMatrix<f64>, sp: &crate::fock::Spectrum<f64>| {
            let v = sp.vectors();
            let mut m = v.adjoint() * rho * v;
            let vals = sp.values();
            for i in 0..vals.len() {
                for j in 0..vals.len() {
                    let g = vals[i] - vals[j];
                    m[(i, j)] *= Complex::new((-(sigma * g).powi(2) / 2.0).exp(), 0.0);
                }
            }
            v * m * v.adjoint()
        };
        let rho = st.to_density();
        let want = exact_dephase(&exact_dephase(rho.matrix(), fs.x_spectrum()), fs.p_spectrum());
        let diff = crate::fock::max_abs(&(got.matrix() - want));
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn helstrom_edge_cases() {
        let fs = space(10);
        let a = OscillatorState::Pure(fs.fock_state(0).unwrap());
        let b = OscillatorState::Pure(fs.fock_state(1).unwrap());
        assert!(helstrom_bound(&a, &b).unwrap().abs() < 1e-15);
        assert!((helstrom_bound(&a, &a).unwrap() - 0.5).abs() < 1e-15);
        let m = OscillatorState::Mixed(fs.vacuum().to_density());
        assert!(matches!(helstrom_bound(&a, &m), Err(GkpError::Unsupported(_))));
    }

    #[test]
    fn auto_cutoff_grows_until_converged() {
        let cache = SpaceCache::<f64>::new();
        let spec = GkpSpec::symmetric(LogicalBit::Zero, 0.3).unwrap();
        let choice = auto_cutoff(spec, HilbertSpec::new(40).unwrap(), 400, &cache).unwrap();
        assert!(choice.space.cutoff() > 40);
        assert!(choice.pair.is_converged());
        assert!(choice.doubling_change < CUTOFF_CONVERGENCE);
    }
}
