//! Sweep drivers. Every point is an independent job; rows are sorted before
//! they are returned, so the worker pool never changes the output.

use std::cell::RefCell;
use std::sync::Arc;

use gkp_core::analytics::{
    lambda_seed, optimal_lambda, p_err_homodyne_formula, p_err_improved_formula, p_err_simple_formula,
    MODEL_DELTA_LIMIT,
};
use gkp_core::fock::{FockSpace, SpaceCache};
use gkp_core::gkp::{
    auto_cutoff, db_to_delta, delta_db, effective_squeezing, helstrom_bound, make_gkp, GkpSpec, GkpStatePair,
};
use gkp_core::optimize::{brent_root, golden_section_min, Tolerance};
use gkp_core::readout::{homodyne_p_err_numeric, simulated_p_err, CircuitParams, ErrorLandscape, HomodyneGrid};
use gkp_core::{GkpError, HilbertSpec, LogicalBit};
use rayon::prelude::*;

use crate::config::{CutoffPolicy, LambdaPolicy, SigmaSpec, SweepConfig};
use crate::error::SweepError;
use crate::table::{sort_rows, Strategy, SweepRow};

/// Upper end of the λ search for mixed states, in units of `√π Δ_eff²/2`.
pub const MIXED_LAMBDA_SPAN: f64 = 6.0;

/// Width of the final golden-section bracket in λ.
const LAMBDA_TOLERANCE: f64 = 1e-9;

/// Parameters of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub delta_db: f64,
    pub delta: f64,
    pub kappa: f64,
    pub sigma: f64,
}

impl Point {
    pub fn new(delta_db: f64, kappa: f64, sigma: f64) -> Self {
        Self {
            delta_db,
            delta: db_to_delta(delta_db),
            kappa,
            sigma,
        }
    }

    fn is_pure(&self) -> bool {
        self.sigma == 0.0
    }

    /// `√(Δ² + 2σ²)`.
    fn predicted_delta_eff(&self) -> f64 {
        (self.delta * self.delta + 2.0 * self.sigma * self.sigma).sqrt()
    }

    fn spec(&self) -> Result<GkpSpec<f64>, GkpError> {
        GkpSpec::new(LogicalBit::Zero, self.delta, self.kappa, self.sigma)
    }
}

/// Code states of a point together with their cheap single-round evaluator.
pub struct Prepared {
    pub space: Arc<FockSpace<f64>>,
    pub pair: GkpStatePair<f64>,
    pub landscape: ErrorLandscape<f64>,
    pub converged: bool,
    pub purity: f64,
    pub delta_eff: f64,
}

pub enum Setup {
    Ready(Box<Prepared>),
    /// No acceptable state could be built at or below `cutoff`.
    Failed { cutoff: usize, reason: String },
}

impl Setup {
    fn ready(&self) -> Option<&Prepared> {
        match self {
            Setup::Ready(p) => Some(p),
            Setup::Failed { .. } => None,
        }
    }

    fn cutoff(&self) -> usize {
        match self {
            Setup::Ready(p) => p.space.cutoff(),
            Setup::Failed { cutoff, .. } => *cutoff,
        }
    }
}

fn finish(space: Arc<FockSpace<f64>>, pair: GkpStatePair<f64>, converged: bool) -> Result<Setup, GkpError> {
    let landscape = ErrorLandscape::new(&space, &pair)?;
    let purity = pair.zero.purity();
    let delta_eff = effective_squeezing(&space, &pair.zero)?;
    Ok(Setup::Ready(Box::new(Prepared {
        converged: converged && pair.is_converged(),
        space,
        pair,
        landscape,
        purity,
        delta_eff,
    })))
}

/// Builds the code states of `point` under the configured cutoff policy.
/// Truncation and quadrature failures become [`Setup::Failed`]; anything
/// else is an error.
pub fn prepare(cfg: &SweepConfig, cache: &SpaceCache<f64>, point: &Point) -> Result<Setup, GkpError> {
    let spec = point.spec()?;
    let attempt = |cutoff: usize, converged: bool| -> Result<Setup, GkpError> {
        let space = cache.get(HilbertSpec::new(cutoff)?);
        match GkpStatePair::from_spec(&space, spec) {
            Ok(pair) => finish(space, pair, converged),
            Err(e) if e.is_convergence_failure() => Ok(Setup::Failed {
                cutoff,
                reason: e.to_string(),
            }),
            Err(e) => Err(e),
        }
    };
    match cfg.cutoff_policy {
        CutoffPolicy::Fixed(n) => attempt(n, true),
        CutoffPolicy::Auto => match auto_cutoff(spec, HilbertSpec::new(cfg.cutoff_start)?, cfg.cutoff_max, cache) {
            Ok(choice) => finish(choice.space, choice.pair, true),
            Err(e) if e.is_convergence_failure() => attempt(cfg.cutoff_max, false),
            Err(e) => Err(e),
        },
    }
}

/// λ minimising the simulated single-round error on `[0, 6·√πΔ_eff²/2]`.
pub fn minimize_simulated(prep: &Prepared) -> Result<f64, GkpError> {
    let hi = MIXED_LAMBDA_SPAN * lambda_seed(prep.delta_eff);
    let tol = Tolerance {
        abs: LAMBDA_TOLERANCE,
        max_iter: 200,
    };
    Ok(golden_section_min(|l| prep.landscape.p_err(l), 0.0, hi.min(0.99), tol)?.x)
}

/// λ for the improved circuit. Pure states inside the model use the
/// analytic optimum; everything else minimises the simulation.
fn choose_lambda(policy: LambdaPolicy, point: &Point, setup: &Setup) -> Result<Option<f64>, GkpError> {
    Ok(match policy {
        LambdaPolicy::Zero => Some(0.0),
        LambdaPolicy::Fixed(l) => Some(l),
        LambdaPolicy::Optimized if point.is_pure() && point.delta <= MODEL_DELTA_LIMIT => Some(optimal_lambda(point.delta)?),
        LambdaPolicy::Optimized => match setup.ready() {
            Some(prep) => Some(minimize_simulated(prep)?),
            None => None,
        },
    })
}

fn blank(point: &Point, strategy: Strategy, setup: &Setup) -> Result<SweepRow, GkpError> {
    let prep = setup.ready();
    let helstrom = match prep {
        Some(p) if p.pair.is_pure() => Some(helstrom_bound(&p.pair.zero, &p.pair.one)?),
        _ => None,
    };
    Ok(SweepRow {
        strategy,
        delta_db: point.delta_db,
        delta: point.delta,
        kappa: point.kappa,
        sigma: point.sigma,
        purity: prep.map(|p| p.purity),
        delta_eff_db: prep.map(|p| delta_db(p.delta_eff)),
        lambda_used: None,
        rounds: None,
        p_err_simulated: None,
        p_err_formula: None,
        p_err_homodyne_formula: Some(p_err_homodyne_formula(point.predicted_delta_eff())?),
        p_err_helstrom: helstrom,
        cutoff_n: setup.cutoff(),
        converged_flag: prep.is_some_and(|p| p.converged),
    })
}

/// Simple circuit with `rounds` majority-vote rounds.
fn simple_row(point: &Point, setup: &Setup, rounds: usize) -> Result<SweepRow, GkpError> {
    let mut row = blank(point, Strategy::Simple, setup)?;
    row.lambda_used = Some(0.0);
    row.rounds = Some(rounds);
    if let Some(prep) = setup.ready() {
        row.p_err_simulated = Some(if rounds == 1 {
            prep.landscape.p_err(0.0)
        } else {
            simulated_p_err(&prep.space, &prep.pair, CircuitParams::new(0.0, rounds)?)?.p_err
        });
    }
    if rounds == 1 && point.is_pure() {
        row.p_err_formula = Some(p_err_simple_formula(point.delta)?);
    }
    Ok(row)
}

/// One round at `lambda` (`None` when it could not be determined).
fn single_round_row(point: &Point, setup: &Setup, strategy: Strategy, lambda: Option<f64>) -> Result<SweepRow, GkpError> {
    let mut row = blank(point, strategy, setup)?;
    row.rounds = Some(1);
    row.lambda_used = lambda;
    if let Some(l) = lambda {
        row.p_err_simulated = setup.ready().map(|p| p.landscape.p_err(l));
        if point.is_pure() {
            row.p_err_formula = Some(p_err_improved_formula(point.delta, l)?);
        }
    }
    Ok(row)
}

fn homodyne_row(point: &Point, setup: &Setup) -> Result<SweepRow, GkpError> {
    let mut row = blank(point, Strategy::Homodyne, setup)?;
    row.p_err_formula = row.p_err_homodyne_formula;
    if let Some(prep) = setup.ready() {
        match homodyne_p_err_numeric(&prep.pair, HomodyneGrid::for_kappa(point.kappa)) {
            Ok(p) => row.p_err_simulated = Some(p),
            Err(e) if e.is_convergence_failure() => row.converged_flag = false,
            Err(e) => return Err(e),
        }
    }
    Ok(row)
}

fn helstrom_row(point: &Point, setup: &Setup) -> Result<SweepRow, GkpError> {
    let mut row = blank(point, Strategy::Helstrom, setup)?;
    row.p_err_simulated = row.p_err_helstrom;
    Ok(row)
}

fn pure_points(cfg: &SweepConfig) -> Vec<Point> {
    cfg.delta_db_grid()
        .into_iter()
        .map(|db| Point::new(db, cfg.kappa_policy.kappa(db_to_delta(db)), 0.0))
        .collect()
}

fn run_points<F>(points: &[Point], job: F) -> Result<Vec<SweepRow>, SweepError>
where
    F: Fn(&Point) -> Result<Vec<SweepRow>, GkpError> + Sync + Send,
{
    let chunks: Vec<Result<Vec<SweepRow>, GkpError>> = points.par_iter().map(job).collect();
    let mut rows = Vec::new();
    for chunk in chunks {
        rows.extend(chunk?);
    }
    sort_rows(&mut rows);
    Ok(rows)
}

/// Simple circuit for every configured round count, the improved circuit,
/// homodyne detection and the Helstrom bound.
pub fn run_fig1a(cfg: &SweepConfig) -> Result<Vec<SweepRow>, SweepError> {
    cfg.validate()?;
    let cache = SpaceCache::new();
    run_points(&pure_points(cfg), |p| {
        let setup = prepare(cfg, &cache, p)?;
        let mut rows = Vec::new();
        for &r in &cfg.rounds_list {
            rows.push(simple_row(p, &setup, r)?);
        }
        let lambda = choose_lambda(cfg.lambda_policy, p, &setup)?;
        rows.push(single_round_row(p, &setup, Strategy::Improved, lambda)?);
        rows.push(homodyne_row(p, &setup)?);
        rows.push(helstrom_row(p, &setup)?);
        Ok(rows)
    })
}

/// Each fixed λ across the squeezing range, plus the optimal-λ envelope.
pub fn run_fig1b(cfg: &SweepConfig) -> Result<Vec<SweepRow>, SweepError> {
    cfg.validate()?;
    let cache = SpaceCache::new();
    run_points(&pure_points(cfg), |p| {
        let setup = prepare(cfg, &cache, p)?;
        let mut rows = Vec::new();
        for &l in &cfg.fixed_lambdas {
            rows.push(single_round_row(p, &setup, Strategy::FixedLambda, Some(l))?);
        }
        let best = choose_lambda(LambdaPolicy::Optimized, p, &setup)?;
        rows.push(single_round_row(p, &setup, Strategy::OptimizedLambda, best)?);
        Ok(rows)
    })
}

/// Simple and improved circuits on noisy code states for every `σ`.
pub fn run_fig1c(cfg: &SweepConfig) -> Result<Vec<SweepRow>, SweepError> {
    cfg.validate()?;
    let cache = SpaceCache::new();
    let sigmas = resolve_sigmas(cfg, &cache)?;
    let points: Vec<Point> = pure_points(cfg)
        .into_iter()
        .flat_map(|p| sigmas.iter().map(move |&s| Point { sigma: s, ..p }))
        .collect();
    run_points(&points, |p| {
        let setup = prepare(cfg, &cache, p)?;
        let lambda = choose_lambda(cfg.lambda_policy, p, &setup)?;
        Ok(vec![
            simple_row(p, &setup, 1)?,
            single_round_row(p, &setup, Strategy::Improved, lambda)?,
        ])
    })
}

/// The configured `σ` values, solving for purity targets if needed.
pub fn resolve_sigmas(cfg: &SweepConfig, cache: &SpaceCache<f64>) -> Result<Vec<f64>, SweepError> {
    match &cfg.sigmas {
        SigmaSpec::Values(s) => Ok(s.clone()),
        SigmaSpec::PurityTargets(targets) => {
            let delta_eff = db_to_delta(cfg.purity_reference_db);
            let jobs: Vec<Result<f64, GkpError>> = targets
                .par_iter()
                .map(|&t| sigma_for_purity(cfg, cache, t, delta_eff))
                .collect();
            Ok(jobs.into_iter().collect::<Result<Vec<_>, _>>()?)
        }
    }
}

/// `σ` such that the code state with `√(Δ² + 2σ²) = delta_eff` has purity
/// `target`. Uses `P ≈ (Δ/Δ_eff)²` for the initial bracket.
pub fn sigma_for_purity(cfg: &SweepConfig, cache: &SpaceCache<f64>, target: f64, delta_eff: f64) -> Result<f64, GkpError> {
    if target >= 1.0 {
        return Ok(0.0);
    }
    let spec_for = |sigma: f64| -> Result<GkpSpec<f64>, GkpError> {
        let delta = (delta_eff * delta_eff - 2.0 * sigma * sigma).sqrt();
        GkpSpec::new(LogicalBit::Zero, delta, cfg.kappa_policy.kappa(delta), sigma)
    };
    let guess = delta_eff * ((1.0 - target) / 2.0).sqrt();
    let ceiling = 0.95 * delta_eff / std::f64::consts::SQRT_2;
    let mut last = None;
    for width in [0.1, 0.3] {
        let (lo, hi) = (guess * (1.0 - width), (guess * (1.0 + width)).min(ceiling));
        // The narrowest peaks sit at the top of the bracket.
        let space = match cfg.cutoff_policy {
            CutoffPolicy::Fixed(n) => cache.get(HilbertSpec::new(n)?),
            CutoffPolicy::Auto => {
                let pure = GkpSpec {
                    sigma: 0.0,
                    ..spec_for(hi)?
                };
                auto_cutoff(pure, HilbertSpec::new(cfg.cutoff_start)?, cfg.cutoff_max, cache)?.space
            }
        };
        let failure = RefCell::new(None);
        let f = |sigma: f64| match spec_for(sigma).and_then(|s| make_gkp(&space, &s)) {
            Ok(state) => state.purity() - target,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        };
        let root = brent_root(f, lo, hi, Tolerance { abs: 1e-7, max_iter: 100 });
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        match root {
            Ok(r) => return Ok(r.x),
            Err(e @ GkpError::BracketFailure { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("loop ran"))
}

/// Rows flagged as not converged.
pub fn unconverged(rows: &[SweepRow]) -> usize {
    rows.iter().filter(|r| !r.converged_flag).count()
}
