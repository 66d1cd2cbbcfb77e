//! Closed-form readout error probabilities and the optimal interaction strength.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{GkpError, Result};
use crate::optimize::{bisect, brent_root, golden_section_min, Tolerance};
use crate::scalar::{lit, Real};

/// Largest meaningful error probability; aggregation caps at this value.
pub const CHANCE: f64 = 0.5;
/// Above this Δ the negligible-overlap assumption behind the formulas fails.
pub const MODEL_DELTA_LIMIT: f64 = 0.5;
/// `|λ|` beyond which the improved-circuit formula leaves its small-λ regime.
pub const LAMBDA_SOFT_LIMIT: f64 = 0.3;

fn check_delta<T: Real>(delta: T) -> Result<()> {
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(GkpError::invalid("delta", format!("must be finite and > 0, got {delta}")));
    }
    Ok(())
}

/// `erfc(√π / (2Δ))`.
pub fn p_err_homodyne_formula<T: Real>(delta: T) -> Result<T> {
    check_delta(delta)?;
    Ok((T::PI().sqrt() / (lit::<T>(2.0) * delta)).erfc())
}

/// `½(1 − e^{−πΔ²/4})`.
pub fn p_err_simple_formula<T: Real>(delta: T) -> Result<T> {
    check_delta(delta)?;
    Ok(-lit::<T>(0.5) * (-T::FRAC_PI_4() * delta * delta).exp_m1())
}

/// `½(1 − e^{−πΔ²/4}(e^{−λ²/Δ²} + sin(√π λ)))`.
///
/// Evaluated as `½[(1 − A) − A(B − 1)]` so that it stays accurate when the
/// result is many orders of magnitude below one.
pub fn p_err_improved_formula<T: Real>(delta: T, lambda: T) -> Result<T> {
    check_delta(delta)?;
    if !lambda.is_finite() {
        return Err(GkpError::invalid("lambda", format!("must be finite, got {lambda}")));
    }
    let q = -T::FRAC_PI_4() * delta * delta;
    let one_minus_a = -q.exp_m1();
    let a = q.exp();
    let b_minus_one = (-(lambda * lambda) / (delta * delta)).exp_m1() + (T::PI().sqrt() * lambda).sin();
    Ok(lit::<T>(0.5) * (one_minus_a - a * b_minus_one))
}

/// `p(λ) − p(λ_ref)` for the improved circuit, free of cancellation.
pub fn p_err_improved_difference<T: Real>(delta: T, lambda: T, lambda_ref: T) -> Result<T> {
    check_delta(delta)?;
    let d2 = delta * delta;
    let half = lit::<T>(0.5);
    let a = (-T::FRAC_PI_4() * d2).exp();
    let gauss = (-(lambda_ref * lambda_ref) / d2).exp() * (-((lambda - lambda_ref) * (lambda + lambda_ref)) / d2).exp_m1();
    let root_pi = T::PI().sqrt();
    let sine = lit::<T>(2.0) * (root_pi * (lambda + lambda_ref) * half).cos() * (root_pi * (lambda - lambda_ref) * half).sin();
    Ok(-half * a * (gauss + sine))
}

/// `(2λ/Δ²) e^{−λ²/Δ²} − √π cos(√π λ)`; proportional to `∂p/∂λ`.
pub fn stationarity<T: Real>(delta: T, lambda: T) -> T {
    let d2 = delta * delta;
    lit::<T>(2.0) * lambda / d2 * (-(lambda * lambda) / d2).exp() - T::PI().sqrt() * (T::PI().sqrt() * lambda).cos()
}

/// Small-Δ approximation `√π Δ² / 2` of the optimal λ.
pub fn lambda_seed<T: Real>(delta: T) -> T {
    T::PI().sqrt() * delta * delta * lit::<T>(0.5)
}

/// Upper end `4√π Δ²` of the search interval for λ.
pub fn lambda_bracket_hi<T: Real>(delta: T) -> T {
    lit::<T>(4.0) * T::PI().sqrt() * delta * delta
}

const SCAN_STEPS: usize = 64;

/// λ minimising the improved-circuit error: the first root of
/// [`stationarity`] in `(0, 4√π Δ²)`, located to 1e-12.
///
/// The first sign change is bracketed by a coarse scan so that later roots
/// (local maxima and further minima at large Δ) are never selected.
pub fn optimal_lambda<T: Real>(delta: T) -> Result<T> {
    check_delta(delta)?;
    if delta > lit(MODEL_DELTA_LIMIT) {
        return Err(GkpError::invalid("delta", format!("optimal lambda needs delta <= {MODEL_DELTA_LIMIT}, got {delta}")));
    }
    let g = |l: T| stationarity(delta, l);
    let hi = lambda_bracket_hi(delta);
    let step = hi / lit::<T>(SCAN_STEPS as f64);
    let mut lo = T::zero();
    let mut g_lo = g(lo);
    for k in 1..=SCAN_STEPS {
        let x = step * lit::<T>(k as f64);
        let g_x = g(x);
        if (g_lo < T::zero()) != (g_x < T::zero()) {
            let tol = Tolerance { abs: lit(1e-12), max_iter: 200 };
            return Ok(brent_root(g, lo, x, tol)?.x);
        }
        lo = x;
        g_lo = g_x;
    }
    Err(GkpError::BracketFailure {
        lo: 0.0,
        hi: crate::scalar::to_f64(hi),
        f_lo: crate::scalar::to_f64(g(T::zero())),
        f_hi: crate::scalar::to_f64(g(hi)),
    })
}

/// Derivative-free argmin of the improved-circuit error on `[0, 4√π Δ²]`.
pub fn golden_section_lambda<T: Real>(delta: T) -> Result<T> {
    check_delta(delta)?;
    let reference = lambda_seed(delta);
    let f = |l: T| p_err_improved_difference(delta, l, reference).unwrap_or(T::max_value().unwrap_or(T::one()));
    let tol = Tolerance {
        abs: lit::<T>(1e-13) * (T::one() + reference),
        max_iter: 400,
    };
    Ok(golden_section_min(f, T::zero(), lambda_bracket_hi(delta), tol)?.x)
}

/// `(5π³/384) Δ⁶`.
pub fn p_err_leading_order<T: Real>(delta: T) -> Result<T> {
    check_delta(delta)?;
    Ok(leading_order_coefficient::<T>() * delta.powi(6))
}

/// `5π³/384`.
pub fn leading_order_coefficient<T: Real>() -> T {
    lit::<T>(5.0) * T::PI().powi(3) / lit::<T>(384.0)
}

/// `½(1 − √(1 − |⟨0̃|1̃⟩|²))`.
pub fn helstrom_formula<T: Real>(overlap: Complex<T>) -> Result<T> {
    let o2 = overlap.norm_sqr();
    if !o2.is_finite() || o2.sqrt() > T::one() + lit(1e-12) {
        return Err(GkpError::invalid("overlap", format!("modulus must be <= 1, got {}", o2.sqrt())));
    }
    let rest = if o2 > T::one() { T::zero() } else { T::one() - o2 };
    // ½(1 − √(1−o²)) = o² / (2(1 + √(1−o²))) avoids cancellation for small overlaps.
    Ok(o2 / (lit::<T>(2.0) * (T::one() + rest.sqrt())))
}

/// Squeezing in dB at which the optimised improved circuit and ideal
/// homodyne detection have equal error, searched in `[lo_db, hi_db]`.
pub fn homodyne_crossover_db<T: Real>(lo_db: T, hi_db: T) -> Result<T> {
    let gap = |db: T| {
        let delta = crate::gkp::db_to_delta(db);
        let improved = optimal_lambda(delta).and_then(|l| p_err_improved_formula(delta, l));
        match (improved, p_err_homodyne_formula(delta)) {
            (Ok(i), Ok(h)) => (i / h).ln(),
            _ => T::zero() / T::zero(),
        }
    };
    Ok(bisect(gap, lo_db, hi_db, Tolerance { abs: lit(1e-10), max_iter: 200 })?.x)
}

/// Least-squares fit of `y = c·x^k` in log-log space; returns `(k, c)`.
pub fn fit_power_law<T: Real>(points: &[(T, T)]) -> Result<(T, T)> {
    if points.len() < 2 {
        return Err(GkpError::invalid("points", "power-law fit needs at least two points"));
    }
    if points.iter().any(|&(x, y)| !(x > T::zero() && y > T::zero())) {
        return Err(GkpError::invalid("points", "power-law fit needs positive data"));
    }
    let n = lit::<T>(points.len() as f64);
    let (mut sx, mut sy, mut sxx, mut sxy) = (T::zero(), T::zero(), T::zero(), T::zero());
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let denom = n * sxx - sx * sx;
    if denom == T::zero() {
        return Err(GkpError::invalid("points", "power-law fit needs distinct abscissae"));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok((slope, intercept.exp()))
}

/// Capped probability with the formula's raw output kept alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capped<T> {
    pub value: T,
    pub raw: T,
}

impl<T: Real> Capped<T> {
    pub fn new(raw: T) -> Self {
        let cap = lit::<T>(CHANCE);
        Self {
            value: if raw > cap { cap } else { raw },
            raw,
        }
    }
}

/// All closed-form error probabilities at one squeezing value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModelPoint<T> {
    pub delta: T,
    /// λ used for the improved circuit; optimised when not given.
    pub lambda: Option<T>,
    pub p_err_homodyne: Capped<T>,
    pub p_err_simple: Capped<T>,
    pub p_err_improved: Option<Capped<T>>,
    pub p_err_helstrom: Option<Capped<T>>,
    pub p_err_leading_order: Capped<T>,
    /// Δ above the range where the formulas are meaningful.
    pub out_of_model: bool,
}

impl<T: Real> ErrorModelPoint<T> {
    /// Evaluates every formula at `delta`. With `lambda = None` the optimal λ
    /// is used when it exists; `helstrom` comes from state overlaps.
    pub fn evaluate(delta: T, lambda: Option<T>, helstrom: Option<T>) -> Result<Self> {
        check_delta(delta)?;
        let out_of_model = delta > lit(MODEL_DELTA_LIMIT);
        let lambda = match lambda {
            Some(l) => Some(l),
            None if !out_of_model => Some(optimal_lambda(delta)?),
            None => None,
        };
        let improved = match lambda {
            Some(l) => Some(Capped::new(p_err_improved_formula(delta, l)?)),
            None => None,
        };
        Ok(Self {
            delta,
            lambda,
            p_err_homodyne: Capped::new(p_err_homodyne_formula(delta)?),
            p_err_simple: Capped::new(p_err_simple_formula(delta)?),
            p_err_improved: improved,
            p_err_helstrom: helstrom.map(Capped::new),
            p_err_leading_order: Capped::new(p_err_leading_order(delta)?),
            out_of_model,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEN_DB: f64 = 0.316_227_766_016_837_94;

    #[test]
    fn homodyne_matches_reference_erfc() {
        // erfc values at 50 digits from an arbitrary-precision library.
        let cases = [
            (TEN_DB, 7.391_233_834_566_207e-5),
            (0.2, 3.690_858_840_318_002_9e-10),
            (0.5, 1.218_888_218_480_288_7e-2),
        ];
        for (d, want) in cases {
            let got = p_err_homodyne_formula(d).unwrap();
            assert!(((got - want) / want).abs() < 1e-13, "{d}: {got:e} vs {want:e}");
        }
        // Leading asymptotic term e^{−z²}/(z√π) with z = √π/(2Δ).
        let asym = 2.0 / std::f64::consts::PI * TEN_DB * (-std::f64::consts::PI / (4.0 * TEN_DB * TEN_DB)).exp();
        let got = p_err_homodyne_formula(TEN_DB).unwrap();
        assert!(((got - asym) / got).abs() < 0.1);
    }

    #[test]
    fn homodyne_is_monotone_and_reports_raw_values() {
        let p: Vec<f64> = [0.2, 0.3, 0.4].iter().map(|&d| p_err_homodyne_formula(d).unwrap()).collect();
        assert!(p[0] < p[1] && p[1] < p[2]);
        let big = p_err_homodyne_formula(100.0f64).unwrap();
        assert!((big - 0.990).abs() < 1e-3);
        let point = ErrorModelPoint::evaluate(100.0, None, None).unwrap();
        assert_eq!(point.p_err_homodyne.value, 0.5);
        assert_eq!(point.p_err_homodyne.raw, big);
        assert!(point.out_of_model);
        assert!(p_err_homodyne_formula(0.0).is_err());
    }

    #[test]
    fn simple_formula_values() {
        let p = p_err_simple_formula(TEN_DB).unwrap();
        assert!((p - 0.037_767_4).abs() < 1e-6);
        let p2 = p_err_simple_formula(0.2f64).unwrap();
        assert!((p2 - 0.015_463_8).abs() < 1e-7);
        // The quadratic term overshoots by a relative πΔ²/8 to leading order.
        for d in [0.05f64, 0.1, 0.15, 0.2] {
            let exact = p_err_simple_formula(d).unwrap();
            let series = std::f64::consts::PI / 8.0 * d * d;
            let rel = (series - exact) / exact;
            assert!((rel / (std::f64::consts::PI * d * d / 8.0) - 1.0).abs() < 0.02);
            if d <= 0.15 {
                assert!(rel < 0.01);
            }
        }
        assert!(p_err_simple_formula(1e-9).unwrap() < 1e-17);
    }

    #[test]
    fn improved_reduces_to_simple() {
        for d in [0.05, 0.2, TEN_DB, 0.45] {
            assert_eq!(p_err_improved_formula(d, 0.0).unwrap(), p_err_simple_formula(d).unwrap());
        }
    }

    #[test]
    fn improved_at_optimum_ten_db() {
        let l = optimal_lambda(TEN_DB).unwrap();
        assert!((l - 0.095_734).abs() < 1e-5, "{l}");
        let p = p_err_improved_formula(TEN_DB, l).unwrap();
        assert!((p - 1.899_68e-4).abs() < 1e-8, "{p:e}");
        assert!(p_err_improved_formula(TEN_DB, -l).unwrap() > p);
    }

    #[test]
    fn difference_form_agrees_with_direct() {
        for (d, l, r) in [(0.2, 0.05, 0.03), (TEN_DB, 0.1, 0.0886), (0.1, 0.0, 0.0089)] {
            let direct = p_err_improved_formula(d, l).unwrap() - p_err_improved_formula(d, r).unwrap();
            let diff = p_err_improved_difference(d, l, r).unwrap();
            assert!((direct - diff).abs() < 1e-15, "{direct:e} vs {diff:e}");
        }
    }

    #[test]
    fn optimal_lambda_agrees_with_golden_section() {
        for d in [0.05, 0.1, 0.2, TEN_DB, 0.4] {
            let root = optimal_lambda(d).unwrap();
            let argmin = golden_section_lambda(d).unwrap();
            assert!((root - argmin).abs() < 1e-9, "{d}: {root} vs {argmin}");
        }
    }

    #[test]
    fn optimal_lambda_approaches_seed() {
        let l = optimal_lambda(0.1f64).unwrap();
        assert!((l / lambda_seed(0.1) - 1.0).abs() < 0.02);
        let r1 = optimal_lambda(0.05f64).unwrap() / lambda_seed(0.05);
        let r2 = optimal_lambda(0.02f64).unwrap() / lambda_seed(0.02);
        assert!((r2 - 1.0).abs() < (r1 - 1.0).abs());
        assert!(optimal_lambda(0.6f64).is_err());
    }

    #[test]
    fn stationarity_holds_at_optimum() {
        for d in [0.1f64, 0.2, 0.3] {
            let l = optimal_lambda(d).unwrap();
            let h = 1e-6;
            let slope = (p_err_improved_formula(d, l + h).unwrap() - p_err_improved_formula(d, l - h).unwrap()) / (2.0 * h);
            assert!(slope.abs() < 1e-6);
        }
    }

    #[test]
    fn leading_order_values() {
        assert!((leading_order_coefficient::<f64>() - 0.403_73).abs() < 5e-6);
        assert!((p_err_leading_order(0.1f64).unwrap() - 4.0373e-7).abs() < 1e-10);
        // (5π³/384)Δ⁶ is the error at λ = √πΔ²/2. At the true optimum the
        // Δ⁶ coefficient is π³/192, i.e. 2/5 of it (high-precision reference
        // ratios 0.401575 at Δ = 0.05 and 0.400063 at Δ = 0.01).
        for (d, at_opt) in [(0.05f64, 0.401_575_43), (0.01, 0.400_062_84)] {
            let lead = p_err_leading_order(d).unwrap();
            let seeded = p_err_improved_formula(d, lambda_seed(d)).unwrap() / lead;
            assert!((seeded - 1.0).abs() < 0.01, "{seeded}");
            let optimal = p_err_improved_formula(d, optimal_lambda(d).unwrap()).unwrap() / lead;
            assert!((optimal - at_opt).abs() < 1e-6, "{optimal}");
        }
    }

    #[test]
    fn helstrom_formula_values() {
        assert_eq!(helstrom_formula(Complex::new(0.0f64, 0.0)).unwrap(), 0.0);
        assert!((helstrom_formula(Complex::new(0.0f64, 1.0)).unwrap() - 0.5).abs() < 1e-15);
        let want = 0.5 * (1.0 - 0.99f64.sqrt());
        assert!((helstrom_formula(Complex::new(0.1f64, 0.0)).unwrap() - want).abs() < 1e-15);
        assert!((want - 2.506e-3).abs() < 1e-6);
        assert!(helstrom_formula(Complex::new(1.0f64 + 1e-9, 0.0)).is_err());
        assert!(helstrom_formula(Complex::new(1.0f64 + 1e-13, 0.0)).is_ok());
    }

    #[test]
    fn improved_beats_simple() {
        for k in 0..=35 {
            let d = 0.05 + 0.01 * k as f64;
            let l = optimal_lambda(d).unwrap();
            assert!(p_err_improved_formula(d, l).unwrap() < p_err_simple_formula(d).unwrap());
        }
    }

    #[test]
    fn crossover_near_nine_db() {
        let db = homodyne_crossover_db(5.0, 14.0).unwrap();
        assert!((8.5..=9.5).contains(&db), "{db}");
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let pts: Vec<(f64, f64)> = (1..=5).map(|k| (k as f64, 3.0 * (k as f64).powi(6))).collect();
        let (k, c) = fit_power_law(&pts).unwrap();
        assert!((k - 6.0).abs() < 1e-12 && (c - 3.0).abs() < 1e-10);
        assert!(fit_power_law(&pts[..1]).is_err());
    }

    #[test]
    fn single_precision_formulas() {
        let p = p_err_simple_formula(TEN_DB as f32).unwrap();
        assert!((p - 0.037_767_4).abs() < 1e-6);
    }
}
