use gkp_core::analytics::{optimal_lambda, p_err_improved_formula, p_err_simple_formula};
use gkp_core::fock::{FockSpace, SpaceCache};
use gkp_core::gkp::{gaussian_displacement_channel, helstrom_bound, ChannelOptions, GkpSpec, GkpStatePair, OscillatorState};
use gkp_core::readout::{
    homodyne_p_err_numeric, run_readout_once, simulated_p_err, single_round_p_err, CircuitParams, HomodyneGrid,
    ReadoutCircuit,
};
use gkp_core::{HilbertSpec, LogicalBit};

const TEN_DB: f64 = 0.316_227_766_016_837_94;

fn agreement(sim: f64, formula: f64) -> bool {
    (sim - formula).abs() <= (0.1 * formula.abs()).max(1e-5)
}

#[test]
fn simulation_matches_formulas() {
    let fs = FockSpace::<f64>::with_cutoff(400).unwrap();
    for d in [0.2, 0.25, 0.3, 0.35] {
        let pair = GkpStatePair::symmetric(&fs, d).unwrap();
        for l in [0.0, 0.05, 0.1, 0.15, -0.05] {
            let sim = single_round_p_err(&fs, &pair, l).unwrap();
            let formula = p_err_improved_formula(d, l).unwrap();
            assert!(agreement(sim, formula), "{d} {l}: {sim:e} vs {formula:e}");
        }
    }
}

#[test]
fn helstrom_dominates_every_circuit() {
    let fs = FockSpace::<f64>::with_cutoff(150).unwrap();
    for d in [0.3, 0.4, 0.5] {
        let pair = GkpStatePair::symmetric(&fs, d).unwrap();
        let bound = helstrom_bound(&pair.zero, &pair.one).unwrap();
        for l in [0.0, 0.05, 0.1, 0.2, 0.3] {
            let p = single_round_p_err(&fs, &pair, l).unwrap();
            assert!(p >= bound - 1e-10, "{d} {l}: {p:e} < {bound:e}");
        }
        let homodyne = homodyne_p_err_numeric(&pair, HomodyneGrid::for_kappa(1.0 / d)).unwrap();
        assert!(homodyne >= bound - 1e-10);
    }
}

#[test]
fn majority_vote_helps_only_the_simple_circuit() {
    let fs = FockSpace::<f64>::with_cutoff(200).unwrap();
    let pair = GkpStatePair::symmetric(&fs, TEN_DB).unwrap();
    let simple: Vec<f64> = [1, 3, 5]
        .iter()
        .map(|&r| simulated_p_err(&fs, &pair, CircuitParams::new(0.0, r).unwrap()).unwrap().p_err)
        .collect();
    assert!(simple[1] < simple[0] && simple[2] < simple[1]);

    for d in [0.25, 0.3, 0.35] {
        let pair = GkpStatePair::symmetric(&fs, d).unwrap();
        let l = optimal_lambda(d).unwrap();
        let one = simulated_p_err(&fs, &pair, CircuitParams::new(l, 1).unwrap()).unwrap().p_err;
        let three = simulated_p_err(&fs, &pair, CircuitParams::new(l, 3).unwrap()).unwrap().p_err;
        assert!(three >= 0.9 * one, "{d}: {three:e} vs {one:e}");
    }
}

#[test]
fn simple_circuit_depends_only_on_logical_z() {
    // A momentum kick D(iβ) changes the state but not its X distribution,
    // so ⟨e^{i√πX}⟩ is unchanged.
    let fs = FockSpace::<f64>::with_cutoff(150).unwrap();
    let pair = GkpStatePair::new(&fs, 0.3, 2.0, 0.0).unwrap();
    let ket = pair.zero.as_ket().unwrap();
    let kicked = fs.displace(nalgebra::Complex::new(0.0, 0.3), ket).unwrap();
    assert!(ket.inner(&kicked).unwrap().norm() < 0.99);
    let z_a = gkp_core::gkp::logical_z_expectation(&fs, &pair.zero).unwrap();
    let kicked = OscillatorState::Pure(kicked);
    let z_b = gkp_core::gkp::logical_z_expectation(&fs, &kicked).unwrap();
    assert!((z_a - z_b).norm() < 1e-8);
    let a = run_readout_once(&fs, &pair.zero, 0.0).unwrap();
    let b = run_readout_once(&fs, &kicked, 0.0).unwrap();
    assert!((a.probabilities[0] - b.probabilities[0]).abs() < 1e-8);
    // The improved circuit does see the difference.
    let c = run_readout_once(&fs, &pair.zero, 0.1).unwrap();
    let d = run_readout_once(&fs, &kicked, 0.1).unwrap();
    assert!((c.probabilities[0] - d.probabilities[0]).abs() > 1e-4);
}

#[test]
fn mixed_back_action_is_consistent() {
    let fs = FockSpace::<f64>::with_cutoff(120).unwrap();
    let pair = GkpStatePair::symmetric(&fs, 0.35).unwrap();
    let rho = gaussian_displacement_channel(&fs, &pair.one, 0.08, ChannelOptions::default()).unwrap();
    let st = OscillatorState::Mixed(rho);
    let circuit = ReadoutCircuit::new(&fs, 0.1).unwrap();
    let shot = circuit.run(&st).unwrap();
    assert!((shot.probabilities[0] + shot.probabilities[1] - 1.0).abs() < 1e-10);
    let mut recombined = shot.post[0].as_ref().unwrap().to_density().into_matrix() * nalgebra::Complex::new(shot.probabilities[0], 0.0);
    recombined += shot.post[1].as_ref().unwrap().to_density().into_matrix() * nalgebra::Complex::new(shot.probabilities[1], 0.0);
    let reduced = circuit.reduced_state(&st).unwrap();
    let diff = (recombined - reduced.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(diff < 1e-9);
}

#[test]
fn global_phase_is_irrelevant() {
    let fs = FockSpace::<f64>::with_cutoff(120).unwrap();
    let pair = GkpStatePair::symmetric(&fs, 0.35).unwrap();
    let ket = pair.zero.as_ket().unwrap();
    let a = run_readout_once(&fs, &pair.zero, 0.1).unwrap();
    let b = run_readout_once(&fs, &OscillatorState::Pure(ket.with_global_phase(1.234)), 0.1).unwrap();
    assert!((a.probabilities[0] - b.probabilities[0]).abs() < 1e-14);
}

#[test]
fn homodyne_relabelling_symmetry_and_chance() {
    let fs = FockSpace::<f64>::with_cutoff(150).unwrap();
    let pair = GkpStatePair::symmetric(&fs, 0.35).unwrap();
    let swapped = GkpStatePair {
        zero: pair.one.clone(),
        one: pair.zero.clone(),
        spec: pair.spec,
    };
    let grid = HomodyneGrid::for_kappa(1.0 / 0.35);
    let a = homodyne_p_err_numeric(&pair, grid).unwrap();
    // With the roles swapped every bin is misread, so errors become successes.
    let b = homodyne_p_err_numeric(&swapped, grid).unwrap();
    assert!((a + b - 1.0).abs() < 1e-10);

    let wide = GkpStatePair::new(&fs, 0.9, 1.2, 0.0).unwrap();
    let p = homodyne_p_err_numeric(&wide, HomodyneGrid::for_kappa(1.2)).unwrap();
    assert!(p < 0.5, "{p}");
}

#[test]
fn homodyne_matches_closed_form() {
    // Peaks of equal parity sit 2√π apart, so interference and the envelope
    // barely matter and the closed form is already accurate at κ = 1/Δ.
    let cache = SpaceCache::<f64>::new();
    for (d, tol) in [(0.35, 1e-5), (0.5, 1e-3)] {
        let closed = gkp_core::analytics::p_err_homodyne_formula(d).unwrap();
        for kappa in [1.0 / d, 2.0 / d] {
            let spec = GkpSpec::new(LogicalBit::Zero, d, kappa, 0.0).unwrap();
            let choice = gkp_core::gkp::auto_cutoff(spec, HilbertSpec::default(), 1200, &cache).unwrap();
            let p = homodyne_p_err_numeric(&choice.pair, HomodyneGrid::for_kappa(kappa)).unwrap();
            assert!(((p - closed) / closed).abs() < tol, "{d} {kappa}: {p:e} vs {closed:e}");
        }
    }
}

#[test]
fn simple_formula_at_ten_db() {
    let fs = FockSpace::<f64>::with_cutoff(150).unwrap();
    let pair = GkpStatePair::symmetric(&fs, TEN_DB).unwrap();
    let p = single_round_p_err(&fs, &pair, 0.0).unwrap();
    assert!((p - p_err_simple_formula(TEN_DB).unwrap()).abs() < 5e-3);
    let shot = run_readout_once(&fs, &pair.zero, 0.0).unwrap();
    assert!(shot.probability_of(LogicalBit::One) < 0.05);
}
