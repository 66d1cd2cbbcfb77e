use gkp_core::analytics::{
    optimal_lambda, p_err_improved_formula, p_err_simple_formula, stationarity, ErrorModelPoint,
};
use gkp_core::fock::{FockSpace, LinearOp, OscillatorKet};
use gkp_core::gkp::{
    db_to_delta, delta_db, gaussian_displacement_channel, helstrom_bound, logical_z_expectation, ChannelOptions,
    GkpStatePair, OscillatorState,
};
use gkp_core::readout::{run_readout_once, single_round_p_err, ReadoutCircuit};
use nalgebra::{Complex, DVector};
use proptest::prelude::*;
use std::sync::OnceLock;

fn small_space() -> &'static FockSpace<f64> {
    static S: OnceLock<FockSpace<f64>> = OnceLock::new();
    S.get_or_init(|| FockSpace::with_cutoff(60).unwrap())
}

fn space_150() -> &'static FockSpace<f64> {
    static S: OnceLock<FockSpace<f64>> = OnceLock::new();
    S.get_or_init(|| FockSpace::with_cutoff(150).unwrap())
}

fn space_300() -> &'static FockSpace<f64> {
    static S: OnceLock<FockSpace<f64>> = OnceLock::new();
    S.get_or_init(|| FockSpace::with_cutoff(300).unwrap())
}

/// Random normalised ket supported on the lowest `support` Fock levels.
fn low_ket(dim: usize, support: usize) -> impl Strategy<Value = OscillatorKet<f64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), support).prop_filter_map("zero vector", move |c| {
        let mut v = DVector::from_element(dim, Complex::new(0.0, 0.0));
        for (n, (re, im)) in c.into_iter().enumerate() {
            v[n] = Complex::new(re, im);
        }
        if v.norm() < 1e-3 {
            return None;
        }
        OscillatorKet::new(v).ok()?.normalize().ok()
    })
}

fn low_levels_identity_defect(op: &LinearOp<f64>, margin: usize) -> f64 {
    op.unitarity_defect(margin)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn displacements_are_unitary(re in -1.5f64..1.5, im in -1.5f64..1.5) {
        let fs = small_space();
        let d = fs.displacement(Complex::new(re, im)).unwrap();
        prop_assert!(low_levels_identity_defect(&d, 25) < 1e-10);
        let back = fs.displacement(Complex::new(-re, -im)).unwrap();
        let id = LinearOp::identity(fs.spec(), gkp_core::fock::Space::Oscillator);
        prop_assert!(d.compose(&back).unwrap().distance_on_low_levels(&id, 25).unwrap() < 1e-10);
    }

    #[test]
    fn readout_conserves_probability(ket in low_ket(61, 12), lambda in -0.5f64..0.5, phase in 0.0f64..6.3) {
        let fs = small_space();
        let st = OscillatorState::Pure(ket.clone());
        let shot = run_readout_once(fs, &st, lambda).unwrap();
        prop_assert!((shot.probabilities[0] + shot.probabilities[1] - 1.0).abs() < 1e-10);

        let rotated = run_readout_once(fs, &OscillatorState::Pure(ket.with_global_phase(phase)), lambda).unwrap();
        prop_assert!((rotated.probabilities[0] - shot.probabilities[0]).abs() < 1e-12);

        let circuit = ReadoutCircuit::new(fs, lambda).unwrap();
        let reduced = circuit.reduced_state(&st).unwrap();
        let mut sum = nalgebra::DMatrix::<Complex<f64>>::zeros(61, 61);
        for q in 0..2 {
            if let Some(post) = &shot.post[q] {
                sum += post.to_density().into_matrix() * Complex::new(shot.probabilities[q], 0.0);
            }
        }
        let diff = (sum - reduced.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-9);
    }

    #[test]
    fn zero_lambda_reduces_to_simple_formula(delta in 0.01f64..1.0) {
        prop_assert_eq!(p_err_improved_formula(delta, 0.0).unwrap(), p_err_simple_formula(delta).unwrap());
    }

    #[test]
    fn optimum_beats_simple_and_is_stationary(delta in 0.05f64..0.4) {
        let l = optimal_lambda(delta).unwrap();
        prop_assert!(l > 0.0);
        prop_assert!(p_err_improved_formula(delta, l).unwrap() < p_err_simple_formula(delta).unwrap());
        prop_assert!(stationarity(delta, l).abs() < 1e-9);
        prop_assert!(p_err_improved_formula(delta, -l).unwrap() > p_err_improved_formula(delta, l).unwrap());
    }

    #[test]
    fn error_model_points_are_probabilities(delta in 0.02f64..3.0) {
        let p = ErrorModelPoint::evaluate(delta, None, None).unwrap();
        let mut all = vec![p.p_err_homodyne.value, p.p_err_simple.value, p.p_err_leading_order.value];
        all.extend(p.p_err_improved.map(|c| c.value));
        for v in all {
            prop_assert!((0.0..=0.5).contains(&v), "{}", v);
        }
    }

    #[test]
    fn decibel_round_trip(db in 0.0f64..30.0) {
        prop_assert!((delta_db(db_to_delta(db)) - db).abs() < 1e-12);
    }

    #[test]
    fn helstrom_formula_in_range(re in -0.7f64..0.7, im in -0.7f64..0.7) {
        let h = gkp_core::analytics::helstrom_formula(Complex::new(re, im)).unwrap();
        prop_assert!((0.0..=0.5).contains(&h));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn helstrom_bound_is_never_beaten(delta in 0.3f64..0.5, lambda in -0.3f64..0.3) {
        let fs = space_150();
        let pair = GkpStatePair::symmetric(fs, delta).unwrap();
        let bound = helstrom_bound(&pair.zero, &pair.one).unwrap();
        let p = single_round_p_err(fs, &pair, lambda).unwrap();
        prop_assert!(p >= bound - 1e-10, "{} < {}", p, bound);
    }

    #[test]
    fn logical_z_converges_in_cutoff(delta in 0.3f64..0.45) {
        let a = GkpStatePair::symmetric(space_150(), delta).unwrap();
        let b = GkpStatePair::symmetric(space_300(), delta).unwrap();
        let za = logical_z_expectation(space_150(), &a.zero).unwrap().re;
        let zb = logical_z_expectation(space_300(), &b.zero).unwrap().re;
        prop_assert!((za - zb).abs() < 1e-8);
        let pa = single_round_p_err(space_150(), &a, 0.1).unwrap();
        let pb = single_round_p_err(space_300(), &b, 0.1).unwrap();
        prop_assert!((pa - pb).abs() < 1e-8);
    }

    #[test]
    fn channel_preserves_trace(sigma in 0.01f64..0.2) {
        let fs = space_150();
        let pair = GkpStatePair::symmetric(fs, 0.35).unwrap();
        let rho = gaussian_displacement_channel(fs, &pair.zero, sigma, ChannelOptions::default()).unwrap();
        prop_assert!((rho.trace() - 1.0).abs() < 1e-8);
        prop_assert!(rho.hermiticity_defect() < 1e-12);
        prop_assert!(rho.purity() < 1.0);
    }
}
