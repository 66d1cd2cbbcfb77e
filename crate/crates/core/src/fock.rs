//! Truncated Fock-space linear algebra.
//!
//! The oscillator is truncated to Fock levels `0..=N`. Quadratures follow
//! `X = (a + a†)/√2`, `P = (a − a†)/(i√2)`, so `[X, P] = i` away from the
//! cutoff. Every unitary is the exponential of a Hermitian generator, taken
//! through its eigendecomposition. Hybrid (qubit ⊗ oscillator) objects use
//! the qubit as the slow index: `index = q·(N+1) + n`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Matrix2, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GkpError, Result};
use crate::scalar::{cplx, creal, lit, matmul, to_f64, CMatrix, CVector, Real};

/// Maximum tolerated population of the two highest Fock levels.
pub const LEAKAGE_THRESHOLD: f64 = 1e-10;
/// Norm tolerance after [`OscillatorKet::normalize`].
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Cutoff used when nothing else is requested.
pub const DEFAULT_CUTOFF: usize = 150;
/// Levels excluded at the top of the basis when checking operator identities.
pub const TRUNCATION_MARGIN: usize = 5;

/// Fock cutoff `N`: the oscillator keeps levels `0..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HilbertSpec {
    cutoff: usize,
}

impl HilbertSpec {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(GkpError::invalid("cutoff", "must be at least 1"));
        }
        Ok(Self { cutoff })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Oscillator dimension `N + 1`.
    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    /// Qubit ⊗ oscillator dimension `2(N + 1)`.
    pub fn hybrid_dim(&self) -> usize {
        2 * self.dim()
    }

    pub fn doubled(&self) -> Self {
        Self {
            cutoff: 2 * self.cutoff,
        }
    }
}

impl Default for HilbertSpec {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

/// Which Hilbert space an operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Oscillator,
    Hybrid,
}

impl Space {
    fn dim(self, spec: HilbertSpec) -> usize {
        match self {
            Space::Oscillator => spec.dim(),
            Space::Hybrid => spec.hybrid_dim(),
        }
    }
}

/// Qubit Pauli axis for the Rabi-type gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub fn matrix<T: Real>(self) -> Matrix2<Complex<T>> {
        let o = T::zero();
        let l = T::one();
        match self {
            PauliAxis::X => Matrix2::new(creal(o), creal(l), creal(l), creal(o)),
            PauliAxis::Y => Matrix2::new(creal(o), cplx(o, -l), cplx(o, l), creal(o)),
            PauliAxis::Z => Matrix2::new(creal(l), creal(o), creal(o), creal(-l)),
        }
    }
}

/// Dense complex operator with cached structural flags.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOp<T: Real> {
    matrix: CMatrix<T>,
    space: Space,
    spec: HilbertSpec,
    hermitian: bool,
    unitary: bool,
}

impl<T: Real> LinearOp<T> {
    /// Wraps a matrix, checking its shape against `spec` and `space`.
    pub fn new(matrix: CMatrix<T>, spec: HilbertSpec, space: Space) -> Result<Self> {
        let dim = space.dim(spec);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(GkpError::DimensionMismatch {
                expected: dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self {
            matrix,
            space,
            spec,
            hermitian: false,
            unitary: false,
        })
    }

    pub fn identity(spec: HilbertSpec, space: Space) -> Self {
        let dim = space.dim(spec);
        Self {
            matrix: CMatrix::identity(dim, dim),
            space,
            spec,
            hermitian: true,
            unitary: true,
        }
    }

    pub fn zero(spec: HilbertSpec, space: Space) -> Self {
        let dim = space.dim(spec);
        Self {
            matrix: CMatrix::zeros(dim, dim),
            space,
            spec,
            hermitian: true,
            unitary: false,
        }
    }

    pub(crate) fn from_parts(
        matrix: CMatrix<T>,
        spec: HilbertSpec,
        space: Space,
        hermitian: bool,
        unitary: bool,
    ) -> Self {
        debug_assert_eq!(matrix.nrows(), space.dim(spec));
        Self {
            matrix,
            space,
            spec,
            hermitian,
            unitary,
        }
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn spec(&self) -> HilbertSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// Marks the operator Hermitian after checking it to `1e-12` in max-norm.
    pub fn assert_hermitian(mut self) -> Result<Self> {
        let defect = to_f64(self.hermiticity_defect());
        if defect > 1e-12 {
            return Err(GkpError::invalid(
                "operator",
                format!("not Hermitian (defect {defect:.3e})"),
            ));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            ..self.clone()
        }
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.space != other.space || self.dim() != other.dim() {
            return Err(GkpError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// Operator product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self {
            matrix: matmul(&self.matrix, &other.matrix),
            space: self.space,
            spec: self.spec,
            hermitian: false,
            unitary: self.unitary && other.unitary,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
            space: self.space,
            spec: self.spec,
            hermitian: self.hermitian && other.hermitian,
            unitary: false,
        })
    }

    pub fn scale(&self, factor: Complex<T>) -> Self {
        let hermitian = self.hermitian && factor.im == T::zero();
        Self {
            matrix: &self.matrix * factor,
            space: self.space,
            spec: self.spec,
            hermitian,
            unitary: false,
        }
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.compose(other)?;
        let ba = other.compose(self)?;
        Ok(Self {
            matrix: ab.matrix - ba.matrix,
            space: self.space,
            spec: self.spec,
            hermitian: false,
            unitary: false,
        })
    }

    /// `‖A − A†‖_max`.
    pub fn hermiticity_defect(&self) -> T {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    /// `‖U†U − I‖_max` over the oscillator levels `n < N + 1 − margin` of
    /// every qubit sector.
    pub fn unitarity_defect(&self, margin: usize) -> T {
        let gram = crate::scalar::matmul_adj_left(&self.matrix, &self.matrix);
        let keep = self.low_levels(margin);
        let mut worst = T::zero();
        for &i in &keep {
            for &j in &keep {
                let target = if i == j { T::one() } else { T::zero() };
                let d = (gram[(i, j)] - creal(target)).modulus();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Max-norm of `self − other` restricted to low oscillator levels.
    pub fn distance_on_low_levels(&self, other: &Self, margin: usize) -> Result<T> {
        self.check_same_space(other)?;
        let keep = self.low_levels(margin);
        let mut worst = T::zero();
        for &i in &keep {
            for &j in &keep {
                let d = (self.matrix[(i, j)] - other.matrix[(i, j)]).modulus();
                if d > worst {
                    worst = d;
                }
            }
        }
        Ok(worst)
    }

    fn low_levels(&self, margin: usize) -> Vec<usize> {
        let osc = self.spec.dim();
        let kept = osc.saturating_sub(margin);
        let sectors = self.dim() / osc;
        (0..sectors)
            .flat_map(|q| (0..kept).map(move |n| q * osc + n))
            .collect()
    }

    /// `self ⊗ I` lifted into the hybrid space (oscillator operators only).
    pub fn lift_to_hybrid(&self) -> Result<Self> {
        if self.space != Space::Oscillator {
            return Err(GkpError::Unsupported("lift of a hybrid operator"));
        }
        let q = Matrix2::<Complex<T>>::identity();
        Ok(Self {
            matrix: kron_qubit(&q, &self.matrix),
            space: Space::Hybrid,
            spec: self.spec,
            hermitian: self.hermitian,
            unitary: self.unitary,
        })
    }
}

pub(crate) fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter()
        .map(|z| z.modulus())
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
}

/// `q ⊗ osc` with the qubit as the slow index.
pub fn kron_qubit<T: Real>(q: &Matrix2<Complex<T>>, osc: &CMatrix<T>) -> CMatrix<T> {
    let d = osc.nrows();
    let mut out = CMatrix::zeros(2 * d, 2 * d);
    for a in 0..2 {
        for b in 0..2 {
            let c = q[(a, b)];
            if c == Complex::new(T::zero(), T::zero()) {
                continue;
            }
            out.view_mut((a * d, b * d), (d, d)).copy_from(&(osc * c));
        }
    }
    out
}

/// Eigendecomposition `H = V diag(λ) V†` of a Hermitian matrix, used to
/// evaluate functions of `H` (in particular `exp(i t H)`).
#[derive(Debug, Clone)]
pub struct Spectrum<T: Real> {
    vectors: CMatrix<T>,
    values: DVector<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn of_hermitian(h: &CMatrix<T>) -> Self {
        let eig = SymmetricEigen::new(h.clone());
        Self {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
        }
    }

    /// Spectrum of `H = diag(phases) · M · diag(phases)†` for real symmetric `M`.
    fn of_gauged_real(m: DMatrix<T>, phases: &CVector<T>) -> Self {
        let eig = SymmetricEigen::new(m);
        let n = phases.len();
        let vectors = CMatrix::from_fn(n, n, |i, j| phases[i] * creal(eig.eigenvectors[(i, j)]));
        Self {
            vectors,
            values: eig.eigenvalues,
        }
    }

    pub fn values(&self) -> &DVector<T> {
        &self.values
    }

    pub fn vectors(&self) -> &CMatrix<T> {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `f(H) = V diag(f(λ)) V†`.
    pub fn function(&self, f: impl Fn(T) -> Complex<T>) -> CMatrix<T> {
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let fj = f(lam);
            scaled.column_mut(j).scale_mut_complex(fj);
        }
        crate::scalar::matmul_adj_right(&scaled, &self.vectors)
    }

    /// Coordinates `V† C` of the columns of `C` in the eigenbasis.
    pub fn to_eigenbasis(&self, columns: &CMatrix<T>) -> CMatrix<T> {
        crate::scalar::matmul_adj_left(&self.vectors, columns)
    }

    /// Maps eigenbasis coordinates back, weighting row `j` by `f(λ_j)`.
    pub fn from_eigenbasis(&self, coords: &CMatrix<T>, f: impl Fn(T) -> Complex<T>) -> CMatrix<T> {
        let mut w = coords.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let fj = f(lam);
            w.row_mut(j).scale_mut_complex(fj);
        }
        matmul(&self.vectors, &w)
    }

    /// `f(H) · C` without forming `f(H)`.
    pub fn apply_function(&self, f: impl Fn(T) -> Complex<T>, columns: &CMatrix<T>) -> CMatrix<T> {
        self.from_eigenbasis(&self.to_eigenbasis(columns), f)
    }

    /// `f(H) · v` for a single vector.
    pub fn apply_function_vec(&self, f: impl Fn(T) -> Complex<T>, v: &CVector<T>) -> CVector<T> {
        let mut c = self.vectors.ad_mul(v);
        for (j, &lam) in self.values.iter().enumerate() {
            c[j] *= f(lam);
        }
        &self.vectors * c
    }
}

trait ScaleComplex<T: Real> {
    fn scale_mut_complex(&mut self, c: Complex<T>);
}

impl<T: Real, R: nalgebra::Dim, C: nalgebra::Dim, S> ScaleComplex<T> for nalgebra::Matrix<Complex<T>, R, C, S>
where
    S: nalgebra::StorageMut<Complex<T>, R, C>,
{
    fn scale_mut_complex(&mut self, c: Complex<T>) {
        for z in self.iter_mut() {
            *z *= c;
        }
    }
}

#[inline]
pub(crate) fn phase<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Matrix exponential of `generator`.
///
/// Anti-Hermitian generators `G = iH` go through the eigendecomposition of
/// `H` and come back flagged unitary; anything else uses Padé scaling and
/// squaring.
pub fn expm<T: Real>(generator: &LinearOp<T>) -> LinearOp<T> {
    let g = generator.matrix();
    let scale = max_abs(g) + T::one();
    let anti = max_abs(&(g + g.adjoint()));
    if anti <= lit::<T>(1e-12) * scale {
        // H = -i G is Hermitian.
        let mut h = g * cplx(T::zero(), -T::one());
        // Symmetrize away rounding before the Hermitian solver sees it.
        h = (&h + h.adjoint()) * creal(lit::<T>(0.5));
        let spectrum = Spectrum::of_hermitian(&h);
        let u = spectrum.function(phase);
        LinearOp::from_parts(u, generator.spec(), generator.space(), false, true)
    } else {
        LinearOp::from_parts(g.clone().exp(), generator.spec(), generator.space(), false, false)
    }
}

/// Builds `X` and `P` for the given truncation.
pub fn make_quadratures<T: Real>(spec: HilbertSpec) -> (LinearOp<T>, LinearOp<T>) {
    let d = spec.dim();
    let inv_sqrt2 = T::FRAC_1_SQRT_2();
    let mut x = CMatrix::zeros(d, d);
    let mut p = CMatrix::zeros(d, d);
    for n in 0..d - 1 {
        let amp = lit::<T>(((n + 1) as f64).sqrt()) * inv_sqrt2;
        x[(n, n + 1)] = creal(amp);
        x[(n + 1, n)] = creal(amp);
        p[(n, n + 1)] = cplx(T::zero(), -amp);
        p[(n + 1, n)] = cplx(T::zero(), amp);
    }
    (
        LinearOp::from_parts(x, spec, Space::Oscillator, true, false),
        LinearOp::from_parts(p, spec, Space::Oscillator, true, false),
    )
}

/// Precomputed quadratures and spectra for one truncation.
///
/// Immutable after construction and safe to share between threads.
#[derive(Debug, Clone)]
pub struct FockSpace<T: Real> {
    spec: HilbertSpec,
    x: LinearOp<T>,
    p: LinearOp<T>,
    x_spectrum: Spectrum<T>,
    p_spectrum: Spectrum<T>,
    squeeze_spectrum: Spectrum<T>,
}

/// `exp(s · (i/2) ln Δ (XP + PX))` squeezes `X` to width `Δ` for `s = −1`;
/// fixed by the squeezed-vacuum variance test.
const SQUEEZE_EXPONENT_SIGN: f64 = -1.0;

impl<T: Real> FockSpace<T> {
    pub fn new(spec: HilbertSpec) -> Self {
        let d = spec.dim();
        let (x, p) = make_quadratures::<T>(spec);

        let x_real = DMatrix::from_fn(d, d, |i, j| x.matrix()[(i, j)].re);
        let x_spectrum = Spectrum::of_gauged_real(x_real, &CVector::from_element(d, Complex::new(T::one(), T::zero())));

        // P = R X R† with R = diag(iⁿ).
        let p_phases = CVector::from_fn(d, |n, _| quarter_turns::<T>(n));
        let p_spectrum = Spectrum {
            vectors: CMatrix::from_fn(d, d, |i, j| p_phases[i] * x_spectrum.vectors[(i, j)]),
            values: x_spectrum.values.clone(),
        };

        // XP + PX = i(a†² − a²) = D M D† with M real, D = diag(e^{iπn/4}).
        let mut m = DMatrix::<T>::zeros(d, d);
        for n in 0..d.saturating_sub(2) {
            let v = lit::<T>((((n + 1) * (n + 2)) as f64).sqrt());
            m[(n, n + 2)] = v;
            m[(n + 2, n)] = v;
        }
        let k_phases = CVector::from_fn(d, |n, _| {
            phase(T::FRAC_PI_4() * lit::<T>(n as f64))
        });
        let squeeze_spectrum = Spectrum::of_gauged_real(m, &k_phases);

        Self {
            spec,
            x,
            p,
            x_spectrum,
            p_spectrum,
            squeeze_spectrum,
        }
    }

    pub fn with_cutoff(cutoff: usize) -> Result<Self> {
        Ok(Self::new(HilbertSpec::new(cutoff)?))
    }

    pub fn spec(&self) -> HilbertSpec {
        self.spec
    }

    pub fn cutoff(&self) -> usize {
        self.spec.cutoff()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn x(&self) -> &LinearOp<T> {
        &self.x
    }

    pub fn p(&self) -> &LinearOp<T> {
        &self.p
    }

    pub fn x_spectrum(&self) -> &Spectrum<T> {
        &self.x_spectrum
    }

    pub fn p_spectrum(&self) -> &Spectrum<T> {
        &self.p_spectrum
    }

    /// Spectrum of `XP + PX`.
    pub fn squeeze_generator_spectrum(&self) -> &Spectrum<T> {
        &self.squeeze_spectrum
    }

    pub fn vacuum(&self) -> OscillatorKet<T> {
        self.fock_state(0).expect("vacuum is always inside the basis")
    }

    pub fn fock_state(&self, n: usize) -> Result<OscillatorKet<T>> {
        if n > self.cutoff() {
            return Err(GkpError::invalid(
                "n",
                format!("Fock level {n} above cutoff {}", self.cutoff()),
            ));
        }
        let mut v = CVector::zeros(self.dim());
        v[n] = creal(T::one());
        Ok(OscillatorKet { amplitudes: v })
    }

    /// Hermitian `H` such that the displacement is `exp(iH)`; returned as the
    /// pair of coefficients `(c_p, c_x)` with `H = c_p P + c_x X`.
    fn displacement_coefficients(alpha: Complex<T>) -> (T, T) {
        let s2 = T::SQRT_2();
        (-s2 * alpha.re, s2 * alpha.im)
    }

    /// `exp(i (c_p P + c_x X))` applied to `columns`, or materialised when
    /// `columns` is `None`.
    fn exp_quadrature_mix(&self, c_p: T, c_x: T, f: impl Fn(T) -> Complex<T> + Copy, columns: Option<&CMatrix<T>>) -> CMatrix<T> {
        let zero = T::zero();
        match (c_p == zero, c_x == zero) {
            (true, true) => {
                let id = CMatrix::identity(self.dim(), self.dim());
                let scale = f(zero);
                match columns {
                    Some(c) => c * scale,
                    None => id * scale,
                }
            }
            (false, true) => {
                let g = move |lam: T| f(c_p * lam);
                match columns {
                    Some(c) => self.p_spectrum.apply_function(g, c),
                    None => self.p_spectrum.function(g),
                }
            }
            (true, false) => {
                let g = move |lam: T| f(c_x * lam);
                match columns {
                    Some(c) => self.x_spectrum.apply_function(g, c),
                    None => self.x_spectrum.function(g),
                }
            }
            (false, false) => {
                let h = self.p.matrix() * creal(c_p) + self.x.matrix() * creal(c_x);
                let spectrum = Spectrum::of_hermitian(&h);
                match columns {
                    Some(c) => spectrum.apply_function(f, c),
                    None => spectrum.function(f),
                }
            }
        }
    }

    fn check_leakage(&self, ket: &CVector<T>) -> Result<()> {
        let leak = leakage_of(ket);
        if leak >= LEAKAGE_THRESHOLD {
            return Err(GkpError::Truncation {
                leakage: leak,
                cutoff: self.cutoff(),
                threshold: LEAKAGE_THRESHOLD,
            });
        }
        Ok(())
    }

    /// `D(α) = exp(√2 i(−Re α · P + Im α · X))`.
    ///
    /// Fails with [`GkpError::Truncation`] when `D(α)|vac⟩` reaches the cutoff.
    pub fn displacement(&self, alpha: Complex<T>) -> Result<LinearOp<T>> {
        check_finite(alpha, "alpha")?;
        let (c_p, c_x) = Self::displacement_coefficients(alpha);
        let u = self.exp_quadrature_mix(c_p, c_x, phase, None);
        self.check_leakage(&u.column(0).into_owned())?;
        Ok(LinearOp::from_parts(u, self.spec, Space::Oscillator, false, true))
    }

    /// `D(α)|ψ⟩` without materialising `D(α)` for axis-aligned `α`.
    pub fn displace(&self, alpha: Complex<T>, ket: &OscillatorKet<T>) -> Result<OscillatorKet<T>> {
        check_finite(alpha, "alpha")?;
        self.check_ket(ket)?;
        let (c_p, c_x) = Self::displacement_coefficients(alpha);
        let col = as_column(&ket.amplitudes);
        let out = self.exp_quadrature_mix(c_p, c_x, phase, Some(&col));
        Ok(OscillatorKet {
            amplitudes: out.column(0).into_owned(),
        })
    }

    /// Squeezing operator `S_Δ`, normalised so that `S_Δ|vac⟩` has
    /// `Var X = Δ²/2`.
    pub fn squeeze(&self, delta: T) -> Result<LinearOp<T>> {
        let t = self.squeeze_angle(delta)?;
        let u = self.squeeze_spectrum.function(|k| phase(t * k));
        self.check_leakage(&u.column(0).into_owned())?;
        Ok(LinearOp::from_parts(u, self.spec, Space::Oscillator, false, true))
    }

    /// `S_Δ|vac⟩`.
    pub fn squeezed_vacuum(&self, delta: T) -> Result<OscillatorKet<T>> {
        let t = self.squeeze_angle(delta)?;
        let v = self
            .squeeze_spectrum
            .apply_function_vec(|k| phase(t * k), &self.vacuum().amplitudes);
        self.check_leakage(&v)?;
        Ok(OscillatorKet { amplitudes: v })
    }

    fn squeeze_angle(&self, delta: T) -> Result<T> {
        if !(delta > T::zero()) || !delta.is_finite() || delta > T::one() {
            return Err(GkpError::invalid("delta", format!("squeeze width must lie in (0, 1], got {delta}")));
        }
        Ok(lit::<T>(SQUEEZE_EXPONENT_SIGN * 0.5) * delta.ln())
    }

    /// Rabi gate `U_k(α) = exp[i(−Re α · P + Im α · X) σ_k]` on the hybrid space.
    ///
    /// Since `σ_k² = I`, `U_k(α) = cos H ⊗ I + i sin H ⊗ σ_k` with
    /// `H = −Re α · P + Im α · X`.
    pub fn rabi_gate(&self, axis: PauliAxis, alpha: Complex<T>) -> Result<LinearOp<T>> {
        check_finite(alpha, "alpha")?;
        let (c_p, c_x) = (-alpha.re, alpha.im);
        let vac = as_column(self.vacuum().amplitudes());
        let probe = self.exp_quadrature_mix(c_p, c_x, phase, Some(&vac));
        self.check_leakage(&probe.column(0).into_owned())?;

        let cos_h = self.exp_quadrature_mix(c_p, c_x, |v: T| creal(v.cos()), None);
        let sin_h = self.exp_quadrature_mix(c_p, c_x, |v: T| creal(v.sin()), None);
        let sigma = axis.matrix::<T>();
        let i_unit = cplx(T::zero(), T::one());
        let id = Matrix2::<Complex<T>>::identity();
        let u = kron_qubit(&id, &cos_h) + kron_qubit(&(sigma * i_unit), &sin_h);
        Ok(LinearOp::from_parts(u, self.spec, Space::Hybrid, false, true))
    }

    /// Matrix-exponential construction of the Rabi gate, exponentiating the
    /// full hybrid generator. Slower than [`Self::rabi_gate`]; kept as an
    /// independent route.
    pub fn rabi_gate_by_expm(&self, axis: PauliAxis, alpha: Complex<T>) -> Result<LinearOp<T>> {
        check_finite(alpha, "alpha")?;
        let h = self.p.matrix() * creal(-alpha.re) + self.x.matrix() * creal(alpha.im);
        let sigma = axis.matrix::<T>() * cplx(T::zero(), T::one());
        let g = LinearOp::from_parts(kron_qubit(&sigma, &h), self.spec, Space::Hybrid, false, false);
        Ok(expm(&g))
    }

    pub(crate) fn check_ket(&self, ket: &OscillatorKet<T>) -> Result<()> {
        if ket.dim() != self.dim() {
            return Err(GkpError::DimensionMismatch {
                expected: self.dim(),
                found: ket.dim(),
            });
        }
        Ok(())
    }
}

pub(crate) fn as_column<T: Real>(v: &CVector<T>) -> CMatrix<T> {
    CMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// Thread-safe cache of [`FockSpace`]s keyed by cutoff.
#[derive(Debug)]
pub struct SpaceCache<T: Real> {
    spaces: Mutex<HashMap<usize, Arc<FockSpace<T>>>>,
}

impl<T: Real> SpaceCache<T> {
    pub fn new() -> Self {
        Self {
            spaces: Mutex::new(HashMap::new()),
        }
    }

    pub fn get(&self, spec: HilbertSpec) -> Arc<FockSpace<T>> {
        if let Some(s) = self.spaces.lock().expect("cache lock").get(&spec.cutoff()) {
            return Arc::clone(s);
        }
        // Built outside the lock; a concurrent duplicate build is harmless.
        let space = Arc::new(FockSpace::new(spec));
        let mut map = self.spaces.lock().expect("cache lock");
        Arc::clone(map.entry(spec.cutoff()).or_insert(space))
    }

    pub fn len(&self) -> usize {
        self.spaces.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<T: Real> Default for SpaceCache<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn quarter_turns<T: Real>(n: usize) -> Complex<T> {
    let (o, l) = (T::zero(), T::one());
    match n % 4 {
        0 => cplx(l, o),
        1 => cplx(o, l),
        2 => cplx(-l, o),
        _ => cplx(o, -l),
    }
}

fn check_finite<T: Real>(alpha: Complex<T>, name: &'static str) -> Result<()> {
    if alpha.re.is_finite() && alpha.im.is_finite() {
        Ok(())
    } else {
        Err(GkpError::invalid(name, "must be finite"))
    }
}

fn leakage_of<T: Real>(v: &CVector<T>) -> f64 {
    let n = v.len();
    let norm2 = to_f64(v.norm_squared());
    if norm2 == 0.0 {
        return 0.0;
    }
    let top = to_f64(v[n - 1].norm_sqr() + if n >= 2 { v[n - 2].norm_sqr() } else { T::zero() });
    top / norm2
}

/// Common interface for states that operators act on.
pub trait QuantumState<T: Real>: Sized {
    fn dim(&self) -> usize;
    /// `⟨A⟩` (unnormalised states are not renormalised).
    fn expectation(&self, op: &LinearOp<T>) -> Result<Complex<T>>;
    /// The state after `op` acts on it.
    fn transformed(&self, op: &LinearOp<T>) -> Result<Self>;
}

/// `op` applied to `state`.
pub fn apply<T: Real, S: QuantumState<T>>(op: &LinearOp<T>, state: &S) -> Result<S> {
    state.transformed(op)
}

/// `⟨op⟩` in `state`.
pub fn expectation<T: Real, S: QuantumState<T>>(op: &LinearOp<T>, state: &S) -> Result<Complex<T>> {
    state.expectation(op)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(GkpError::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

/// Pure oscillator state in the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorKet<T: Real> {
    amplitudes: CVector<T>,
}

impl<T: Real> OscillatorKet<T> {
    pub fn new(amplitudes: CVector<T>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(GkpError::invalid("amplitudes", "need at least two Fock levels"));
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &CVector<T> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector<T> {
        self.amplitudes
    }

    pub fn cutoff(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn norm(&self) -> T {
        self.amplitudes.norm()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > T::zero()) {
            return Err(GkpError::invalid("state", "cannot normalise a zero vector"));
        }
        Ok(Self {
            amplitudes: &self.amplitudes / creal(n),
        })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|c_N|² + |c_{N−1}|²` relative to the squared norm.
    pub fn leakage(&self) -> f64 {
        leakage_of(&self.amplitudes)
    }

    pub fn is_converged(&self) -> bool {
        self.leakage() < LEAKAGE_THRESHOLD
    }

    /// Multiplies by the global phase `e^{iθ}`.
    pub fn with_global_phase(&self, theta: T) -> Self {
        Self {
            amplitudes: &self.amplitudes * phase(theta),
        }
    }

    pub fn to_density(&self) -> DensityOp<T> {
        DensityOp {
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    /// Embeds the state into a larger cutoff by zero padding.
    pub fn padded(&self, cutoff: usize) -> Result<Self> {
        if cutoff < self.cutoff() {
            return Err(GkpError::invalid("cutoff", "padding cannot shrink a state"));
        }
        let mut v = CVector::zeros(cutoff + 1);
        v.rows_mut(0, self.dim()).copy_from(&self.amplitudes);
        Ok(Self { amplitudes: v })
    }
}

impl<T: Real> QuantumState<T> for OscillatorKet<T> {
    fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    fn expectation(&self, op: &LinearOp<T>) -> Result<Complex<T>> {
        check_dim(op.dim(), self.dim())?;
        Ok(self.amplitudes.dotc(&(op.matrix() * &self.amplitudes)))
    }

    fn transformed(&self, op: &LinearOp<T>) -> Result<Self> {
        check_dim(op.dim(), self.dim())?;
        Ok(Self {
            amplitudes: op.matrix() * &self.amplitudes,
        })
    }
}

/// Oscillator density operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOp<T: Real> {
    matrix: CMatrix<T>,
}

impl<T: Real> DensityOp<T> {
    pub fn new(matrix: CMatrix<T>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(GkpError::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn cutoff(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn trace(&self) -> T {
        self.matrix.diagonal().iter().fold(T::zero(), |acc, z| acc + z.re)
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> T {
        // Tr(ρ²) = Σ_ij ρ_ij ρ_ji = Σ_ij |ρ_ij|² for Hermitian ρ.
        self.matrix.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }

    pub fn normalize(&self) -> Result<Self> {
        let t = self.trace();
        if !(t > T::zero()) {
            return Err(GkpError::invalid("state", "density operator has non-positive trace"));
        }
        Ok(Self {
            matrix: &self.matrix / creal(t),
        })
    }

    pub fn hermiticity_defect(&self) -> T {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn min_eigenvalue(&self) -> T {
        let h = (&self.matrix + self.matrix.adjoint()) * creal(lit::<T>(0.5));
        let eig = SymmetricEigen::new(h);
        eig.eigenvalues.iter().fold(T::max_value().unwrap_or(T::one()), |acc, &v| if v < acc { v } else { acc })
    }

    /// Trace 1, Hermitian and positive semidefinite within the crate tolerances.
    pub fn validate(&self) -> Result<()> {
        let t = to_f64(self.trace());
        if (t - 1.0).abs() > 1e-10 {
            return Err(GkpError::invalid("density", format!("trace {t} != 1")));
        }
        let h = to_f64(self.hermiticity_defect());
        if h > 1e-10 {
            return Err(GkpError::invalid("density", format!("hermiticity defect {h:.3e}")));
        }
        let m = to_f64(self.min_eigenvalue());
        if m < -1e-9 {
            return Err(GkpError::invalid("density", format!("negative eigenvalue {m:.3e}")));
        }
        Ok(())
    }

    /// `ρ_NN + ρ_{N−1,N−1}` relative to the trace.
    pub fn leakage(&self) -> f64 {
        let n = self.matrix.nrows();
        let tr = to_f64(self.trace());
        if tr == 0.0 {
            return 0.0;
        }
        to_f64(self.matrix[(n - 1, n - 1)].re + self.matrix[(n - 2, n - 2)].re) / tr
    }

    pub fn is_converged(&self) -> bool {
        self.leakage() < LEAKAGE_THRESHOLD
    }

    /// `Σ_ij |ρ_ij − σ_ij|` style max-norm distance.
    pub fn max_distance(&self, other: &Self) -> Result<T> {
        check_dim(self.dim(), other.dim())?;
        Ok(max_abs(&(&self.matrix - &other.matrix)))
    }
}

impl<T: Real> QuantumState<T> for DensityOp<T> {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn expectation(&self, op: &LinearOp<T>) -> Result<Complex<T>> {
        check_dim(op.dim(), self.dim())?;
        Ok(trace_of_product(op.matrix(), &self.matrix))
    }

    fn transformed(&self, op: &LinearOp<T>) -> Result<Self> {
        check_dim(op.dim(), self.dim())?;
        let half = matmul(op.matrix(), &self.matrix);
        Ok(Self {
            matrix: crate::scalar::matmul_adj_right(&half, op.matrix()),
        })
    }
}

/// `Tr(A B)` in O(n²).
pub(crate) fn trace_of_product<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Complex<T> {
    let n = a.nrows();
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Joint qubit ⊗ oscillator state, qubit index slow.
#[derive(Debug, Clone, PartialEq)]
pub enum HybridState<T: Real> {
    Pure(CVector<T>),
    Mixed(CMatrix<T>),
}

impl<T: Real> HybridState<T> {
    /// `|q⟩ ⊗ |ψ⟩` for qubit amplitudes `q = (q0, q1)`.
    pub fn product(qubit: [Complex<T>; 2], osc: &OscillatorKet<T>) -> Self {
        let d = osc.dim();
        let mut v = CVector::zeros(2 * d);
        for (q, amp) in qubit.iter().enumerate() {
            v.rows_mut(q * d, d).copy_from(&(osc.amplitudes() * *amp));
        }
        HybridState::Pure(v)
    }

    /// `ρ_q ⊗ ρ_osc`.
    pub fn product_mixed(qubit: &Matrix2<Complex<T>>, osc: &DensityOp<T>) -> Self {
        HybridState::Mixed(kron_qubit(qubit, osc.matrix()))
    }

    /// Qubit prepared in `|0⟩`.
    pub fn ground_qubit_with(osc: &OscillatorKet<T>) -> Self {
        Self::product([creal(T::one()), creal(T::zero())], osc)
    }

    pub fn osc_dim(&self) -> usize {
        QuantumState::dim(self) / 2
    }

    pub fn to_density(&self) -> CMatrix<T> {
        match self {
            HybridState::Pure(v) => v * v.adjoint(),
            HybridState::Mixed(m) => m.clone(),
        }
    }

    /// Norm (pure) or trace (mixed).
    pub fn total_weight(&self) -> T {
        match self {
            HybridState::Pure(v) => v.norm_squared(),
            HybridState::Mixed(m) => m.diagonal().iter().fold(T::zero(), |a, z| a + z.re),
        }
    }

    /// `Tr_osc ρ`, the 2×2 qubit density matrix.
    pub fn partial_trace_qubit(&self) -> Matrix2<Complex<T>> {
        let d = self.osc_dim();
        let rho = self.to_density();
        Matrix2::from_fn(|a, b| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for n in 0..d {
                acc += rho[(a * d + n, b * d + n)];
            }
            acc
        })
    }

    /// `Tr_qubit ρ`, the reduced oscillator state.
    pub fn reduced_oscillator(&self) -> DensityOp<T> {
        let d = self.osc_dim();
        let rho = self.to_density();
        let m = rho.view((0, 0), (d, d)) + rho.view((d, d), (d, d));
        DensityOp { matrix: m }
    }

    /// Projects the qubit onto `|q⟩`: returns the outcome probability and the
    /// unnormalised oscillator block `⟨q|ρ|q⟩`.
    pub fn project_qubit(&self, q: usize) -> (T, DensityOp<T>) {
        let d = self.osc_dim();
        let block = match self {
            HybridState::Pure(v) => {
                let s = v.rows(q * d, d).into_owned();
                &s * s.adjoint()
            }
            HybridState::Mixed(m) => m.view((q * d, q * d), (d, d)).into_owned(),
        };
        let rho = DensityOp { matrix: block };
        (rho.trace(), rho)
    }
}

impl<T: Real> QuantumState<T> for HybridState<T> {
    fn dim(&self) -> usize {
        match self {
            HybridState::Pure(v) => v.len(),
            HybridState::Mixed(m) => m.nrows(),
        }
    }

    fn expectation(&self, op: &LinearOp<T>) -> Result<Complex<T>> {
        check_dim(op.dim(), self.dim())?;
        Ok(match self {
            HybridState::Pure(v) => v.dotc(&(op.matrix() * v)),
            HybridState::Mixed(m) => trace_of_product(op.matrix(), m),
        })
    }

    fn transformed(&self, op: &LinearOp<T>) -> Result<Self> {
        check_dim(op.dim(), self.dim())?;
        Ok(match self {
            HybridState::Pure(v) => HybridState::Pure(op.matrix() * v),
            HybridState::Mixed(m) => {
                let half = matmul(op.matrix(), m);
                HybridState::Mixed(crate::scalar::matmul_adj_right(&half, op.matrix()))
            }
        })
    }
}

/// Free-function form of [`HybridState::partial_trace_qubit`].
pub fn partial_trace_qubit<T: Real>(state: &HybridState<T>) -> Matrix2<Complex<T>> {
    state.partial_trace_qubit()
}

/// Free-function form of [`OscillatorKet::normalize`].
pub fn normalize<T: Real>(state: &OscillatorKet<T>) -> Result<OscillatorKet<T>> {
    state.normalize()
}
