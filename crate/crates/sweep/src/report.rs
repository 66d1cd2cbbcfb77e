//! Single-point reports behind `optimize-lambda`, `state-info` and `validate`.

use gkp_core::analytics::{
    lambda_seed, optimal_lambda, p_err_homodyne_formula, p_err_improved_formula, p_err_leading_order,
    p_err_simple_formula,
};
use gkp_core::export::StateDump;
use gkp_core::fock::SpaceCache;
use gkp_core::gkp::{db_to_delta, delta_db, helstrom_bound, logical_z_expectation, stabilizer_expectation};
use gkp_core::invariants::{run_suite, Check};
use serde::Serialize;

use crate::config::{SweepConfig, KappaPolicy};
use crate::error::SweepError;
use crate::sweep::{prepare, run_fig1a, Point, Setup};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaReport {
    pub delta_db: f64,
    pub delta: f64,
    pub lambda_opt: f64,
    /// `√π Δ²/2`.
    pub lambda_seed: f64,
    pub p_err_improved: f64,
    pub p_err_simple: f64,
    pub p_err_homodyne: f64,
    pub p_err_leading_order: f64,
}

pub fn optimize_lambda_report(delta_db_value: f64) -> Result<LambdaReport, SweepError> {
    let delta = db_to_delta(delta_db_value);
    let lambda_opt = optimal_lambda(delta)?;
    Ok(LambdaReport {
        delta_db: delta_db_value,
        delta,
        lambda_opt,
        lambda_seed: lambda_seed(delta),
        p_err_improved: p_err_improved_formula(delta, lambda_opt)?,
        p_err_simple: p_err_simple_formula(delta)?,
        p_err_homodyne: p_err_homodyne_formula(delta)?,
        p_err_leading_order: p_err_leading_order(delta)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateInfo {
    pub delta_db: f64,
    pub delta: f64,
    pub kappa: f64,
    pub sigma: f64,
    #[serde(rename = "cutoff_N")]
    pub cutoff_n: usize,
    pub converged: bool,
    pub purity: f64,
    pub delta_eff: f64,
    pub delta_eff_db: f64,
    /// `Re⟨Z⟩` for logical 0 and 1.
    pub logical_z: [f64; 2],
    /// `|⟨e^{2i√πX}⟩|` of logical 0.
    pub stabilizer: f64,
    pub leakage: f64,
    pub p_err_helstrom: Option<f64>,
}

/// Code-state diagnostics, plus a dump of logical 0 if requested.
pub fn state_info(
    cfg: &SweepConfig,
    delta_db_value: f64,
    sigma: f64,
    kappa: Option<f64>,
) -> Result<(StateInfo, StateDump), SweepError> {
    let delta = db_to_delta(delta_db_value);
    let kappa = kappa.unwrap_or_else(|| cfg.kappa_policy.kappa(delta));
    let point = Point::new(delta_db_value, kappa, sigma);
    let cache = SpaceCache::new();
    let prep = match prepare(cfg, &cache, &point)? {
        Setup::Ready(p) => p,
        Setup::Failed { cutoff, reason } => {
            return Err(gkp_core::GkpError::NotConverged {
                what: "code state",
                detail: format!("cutoff {cutoff}: {reason}"),
            }
            .into())
        }
    };
    let z0 = logical_z_expectation(&prep.space, &prep.pair.zero)?.re;
    let z1 = logical_z_expectation(&prep.space, &prep.pair.one)?.re;
    let info = StateInfo {
        delta_db: delta_db_value,
        delta,
        kappa,
        sigma,
        cutoff_n: prep.space.cutoff(),
        converged: prep.converged,
        purity: prep.purity,
        delta_eff: prep.delta_eff,
        delta_eff_db: delta_db(prep.delta_eff),
        logical_z: [z0, z1],
        stabilizer: stabilizer_expectation(&prep.space, &prep.pair.zero)?.norm(),
        leakage: prep.pair.zero.leakage().max(prep.pair.one.leakage()),
        p_err_helstrom: if prep.pair.is_pure() {
            Some(helstrom_bound(&prep.pair.zero, &prep.pair.one)?)
        } else {
            None
        },
    };
    Ok((info, StateDump::from_state(&prep.pair.zero)))
}

/// Core invariant suite plus sweep-level checks on a small table.
pub fn validate() -> Result<Vec<Check>, SweepError> {
    let mut checks = run_suite()?;

    let mut cfg = SweepConfig::parse("delta_db_min = 9\ndelta_db_max = 11\ndelta_db_points = 2\ncutoff = 200\nrounds = 1")?;
    cfg.kappa_policy = KappaPolicy::InverseDelta;
    let rows = run_fig1a(&cfg)?;
    let mut out_of_range = 0;
    let mut disagreeing = 0;
    for r in &rows {
        if let Some(p) = r.p_err_simulated {
            let floor = r.p_err_helstrom.unwrap_or(0.0) - 1e-10;
            if !(floor..=0.5).contains(&p) {
                out_of_range += 1;
            }
            if let Some(f) = r.p_err_formula {
                let circuit = r.rounds == Some(1);
                if circuit && r.converged_flag && r.delta <= 0.35 && (p - f).abs() > (0.1 * f).max(1e-5) {
                    disagreeing += 1;
                }
            }
        }
    }
    checks.push(Check {
        name: "sweep p_err within [Helstrom, 1/2]",
        passed: out_of_range == 0,
        detail: format!("{out_of_range} of {} rows outside", rows.len()),
    });
    checks.push(Check {
        name: "sweep formula agreement",
        passed: disagreeing == 0,
        detail: format!("{disagreeing} rows disagree"),
    });
    checks.push(Check {
        name: "sweep convergence",
        passed: rows.iter().all(|r| r.converged_flag),
        detail: format!("{} rows", rows.len()),
    });
    Ok(checks)
}
