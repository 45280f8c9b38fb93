//! Per-instance computations behind the subcommands. Each function fills
//! the columns it owns, so composed commands reproduce the individual ones.

use bumplab_core::bumps::{ap_constant, ArgMode, BumpTable};
use bumplab_core::corona::{corona_audit, testing_dual_function, BumpContext, DEFAULT_THRESHOLD};
use bumplab_core::math::conjugate_exponent;
use bumplab_core::orlicz::DEFAULT_TOL;
use bumplab_core::search::{local_search, search_oracle, Evaluator, Instance, Objective, SearchConfig, SearchResult};
use bumplab_core::selfimprove::{proposition_eta, BumpCase};
use bumplab_core::sparse::{norm_oracle, testing_constant, OracleConfig};

use crate::error::CliError;
use crate::report::ReportRow;

/// Generations checked by the packing audit.
pub const PACKING_DEPTH: u32 = 3;

pub const MODES: [ArgMode; 2] = [ArgMode::OnePlusRho, ArgMode::Rho];

fn column_suffix(mode: ArgMode) -> &'static str {
    match mode {
        ArgMode::OnePlusRho => "one_plus_rho",
        ArgMode::Rho => "rho",
    }
}

/// The bump constants of both pairings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub ap: f64,
    pub separated_sw: f64,
    pub separated_ws: f64,
    /// `(⌈σ,w⌉, ⌈w,σ⌉)` per argument mode, in the order of [`MODES`].
    pub entangled: [(f64, f64); 2],
}

impl Constants {
    pub fn entangled_sum(&self, mode: ArgMode) -> f64 {
        let (a, b) = self.entangled[MODES.iter().position(|m| *m == mode).unwrap_or(0)];
        a + b
    }
}

pub fn header(row: &mut ReportRow, inst: &Instance) {
    let lattice = inst.lattice();
    row.int("dimension", lattice.dim as usize).int("depth", lattice.depth as usize).real("p", inst.p);
}

pub fn constants(row: &mut ReportRow, inst: &Instance) -> Result<Constants, CliError> {
    let pp = conjugate_exponent(inst.p);
    let sw = BumpTable::new(&inst.sigma, &inst.w, &inst.a.dual()?, inst.p, DEFAULT_TOL)?;
    let ws = BumpTable::new(&inst.w, &inst.sigma, &inst.b.dual()?, pp, DEFAULT_TOL)?;
    let mut c = Constants {
        ap: ap_constant(&inst.sigma, &inst.w, inst.p)?,
        separated_sw: sw.separated().0,
        separated_ws: ws.separated().0,
        entangled: [(0.0, 0.0); 2],
    };
    row.real("ap", c.ap).real("separated_sw", c.separated_sw).real("separated_ws", c.separated_ws);
    for (k, mode) in MODES.into_iter().enumerate() {
        let pair = (sw.entangled(&inst.eps_p, mode).0, ws.entangled(&inst.eps_pp, mode).0);
        c.entangled[k] = pair;
        let sfx = column_suffix(mode);
        row.real(&format!("entangled_sw_{sfx}"), pair.0).real(&format!("entangled_ws_{sfx}"), pair.1);
    }
    Ok(c)
}

pub fn testing(row: &mut ReportRow, inst: &Instance) -> Result<f64, CliError> {
    let t = testing_constant(&inst.collection, &inst.sigma, &inst.w, inst.p)?;
    row.real("testing", t.value).real("testing_sigma", t.sigma_side).real("testing_w", t.w_side);
    Ok(t.value)
}

pub fn oracle_config(inst: &Instance) -> OracleConfig {
    OracleConfig { seed: inst.seed, ..OracleConfig::default() }
}

/// Norm estimate; `converged = false` is flagged in the row.
pub fn norm(row: &mut ReportRow, inst: &Instance) -> Result<(f64, bool), CliError> {
    let est = norm_oracle(&inst.collection, &inst.sigma, &inst.w, inst.p, &oracle_config(inst), None)?;
    row.real("norm", est.value).int("norm_iterations", est.iterations).boolean("norm_converged", est.converged);
    if !est.converged {
        row.flag("norm-not-converged");
    }
    Ok((est.value, est.converged))
}

pub fn corona(row: &mut ReportRow, inst: &Instance, mode: ArgMode) -> Result<(), CliError> {
    let ctx = BumpContext::new(&inst.sigma, &inst.w, &inst.a, &inst.eps_p, inst.p, mode)?;
    let g = testing_dual_function(&inst.collection, &inst.sigma, inst.p)?;
    let audit = corona_audit(&inst.collection, &inst.sigma, &inst.w, &g, &ctx, DEFAULT_THRESHOLD, PACKING_DEPTH)?;
    let r = &audit.report;
    row.text("arg_mode", mode.name())
        .real("lemma_s", r.s)
        .real("lemma_s1", r.s1)
        .real("lemma_s2", r.s2)
        .real("lemma_s2_stopping_core", r.s2_stopping_core)
        .real("lemma_s3", r.s3)
        .real("lemma_s3_literal", r.s3_literal)
        .real("quasi_orthogonality", r.quasi_orthogonality)
        .real("pointwise_sum", r.pointwise_sum)
        .real("decrease", r.decrease)
        .real("holder", r.holder)
        .real("zs2w", r.zs2w)
        .real("sw", r.sw)
        .real("sharp_min", r.sharp_min)
        .int("sharp_failures", r.sharp_failures)
        .int("stopping_t", r.stopping_t)
        .int("stopping_s", r.stopping_s)
        .int("regime_1", r.regimes[0])
        .int("regime_2", r.regimes[1])
        .int("regime_3", r.regimes[2])
        .int("parts", audit.parts)
        .int("strata", audit.strata)
        .int("coronas", audit.coronas)
        .real("packing_max", audit.packing.iter().copied().fold(0.0, f64::max))
        .int("t_not_in_s", audit.invariants.t_not_in_s)
        .int("is_above_it", audit.invariants.is_above_it)
        .int("mislabeled", audit.invariants.mislabeled);
    if !audit.invariants.holds() {
        row.flag("corona-invariant-violated");
    }
    if !audit.packing_holds() {
        row.flag("packing-violated");
    }
    Ok(())
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

/// Everything at once: constants, testing, norm, corona diagnostics and the
/// two objectives. Returns whether the norm estimate converged.
pub fn verify(row: &mut ReportRow, inst: &Instance, mode: ArgMode) -> Result<bool, CliError> {
    let c = constants(row, inst)?;
    let t = testing(row, inst)?;
    let (n, converged) = norm(row, inst)?;
    corona(row, inst, mode)?;
    row.real("sandwich", ratio(n, t))
        .real("theorem_ratio", ratio(n, c.entangled_sum(mode)))
        .real("conjecture_ratio", ratio(n, c.separated_sw + c.separated_ws))
        .real("eps_floor", inst.eps_p.eval(2.0).min(inst.eps_pp.eval(2.0)));
    Ok(converged)
}

pub fn prop_eta(row: &mut ReportRow, inst: &Instance, case: BumpCase, eta: f64, eta_prime: f64, mode: ArgMode) -> Result<(), CliError> {
    let r = proposition_eta(&inst.sigma, &inst.w, inst.p, eta, eta_prime, case, mode)?;
    row.text("arg_mode", mode.name())
        .text("prop_case", case.name())
        .real("prop_separated", r.separated)
        .real("prop_entangled", r.entangled)
        .real("prop_ratio", r.ratio)
        .real("theta_max", r.theta_max)
        .real("ep_max", r.ep_max)
        .real("finite_integral", r.finite_integral);
    Ok(())
}

/// Anneals `inst` for `steps` steps, seeded by the instance seed.
pub fn anneal(inst: &Instance, objective: Objective, steps: usize, greedy: bool, mode: ArgMode) -> Result<SearchResult, CliError> {
    let ev = Evaluator::new(inst.clone(), mode, search_oracle(inst.seed))?;
    let config = SearchConfig { steps, greedy, seed: inst.seed, ..SearchConfig::default() };
    Ok(local_search(ev, objective, &config)?)
}

pub fn search_fields(row: &mut ReportRow, objective: Objective, steps: usize, r: &SearchResult) {
    row.text("search_objective", objective.name())
        .int("search_steps", steps)
        .real("search_start", r.start_value)
        .real("search_best", r.best_value)
        .real("search_gain", r.final_quarter_gain())
        .int("accepted", r.accepted)
        .int("rejected_infinite", r.rejected_infinite)
        .int("inadmissible", r.inadmissible);
}
