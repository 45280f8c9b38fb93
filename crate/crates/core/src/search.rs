//! Random weight pairs and simulated-annealing search for large
//! norm-to-constant ratios.

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bumps::{ArgMode, BumpTable, EpsilonFunction};
use crate::error::{invalid, Result};
use crate::grid::{DyadicCube, Lattice, WeightGrid};
use crate::math::{self, conjugate_exponent};
use crate::orlicz::{YoungFunction, DEFAULT_TOL};
use crate::sparse::{norm_oracle, OracleConfig, SparseCollection};

/// A weight pair with its sparse family and the bump data of the theorem.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub sigma: WeightGrid,
    pub w: WeightGrid,
    /// `1/2`-sparse family.
    pub collection: SparseCollection,
    pub p: f64,
    /// `A ∈ B_p`, paired with `σ`.
    pub a: YoungFunction,
    /// `B ∈ B_{p'}`, paired with `w`.
    pub b: YoungFunction,
    pub eps_p: EpsilonFunction,
    pub eps_pp: EpsilonFunction,
    pub seed: u64,
}

/// Bump data used by generated instances: log bumps with parameter `eta`
/// and power ε-functions with exponents `eta/(2p')` and `eta/(2p)`.
pub fn default_bumps(p: f64, eta: f64) -> Result<(YoungFunction, YoungFunction, EpsilonFunction, EpsilonFunction)> {
    let pp = conjugate_exponent(p);
    Ok((
        YoungFunction::log_bump(p, eta)?,
        YoungFunction::log_bump(pp, eta)?,
        EpsilonFunction::power(eta / (2.0 * pp), pp)?,
        EpsilonFunction::power(eta / (2.0 * p), p)?,
    ))
}

impl Instance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sigma: WeightGrid,
        w: WeightGrid,
        collection: SparseCollection,
        p: f64,
        a: YoungFunction,
        b: YoungFunction,
        eps_p: EpsilonFunction,
        eps_pp: EpsilonFunction,
        seed: u64,
    ) -> Result<Self> {
        sigma.same_shape(&w)?;
        if collection.lattice() != sigma.lattice() {
            return Err(crate::Error::GridMismatch);
        }
        if collection.verdict().worst_fraction > 0.5 {
            return Err(crate::Error::NotSparse(collection.verdict().worst_fraction));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(invalid("p", "must be a finite real > 1"));
        }
        Ok(Instance { sigma, w, collection, p, a, b, eps_p, eps_pp, seed })
    }

    pub fn lattice(&self) -> Lattice {
        self.sigma.lattice()
    }
}

/// Weight families for [`generate_instance`]. `scale = 0` gives constant
/// weights in every family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    /// Independent `exp(N(0, scale²))` cells.
    Lognormal,
    /// `|x - x₀|^a` at cell centers, `a` uniform in `[-scale, scale]`
    /// clipped above `-0.9 d`.
    PowerSpike,
    /// `r^k` where `k` is the level at which a cell leaves a random branch,
    /// `log₂ r` uniform in `[-1.5 scale, 1.5 scale]`.
    Lacunary,
}

impl GenKind {
    pub fn name(self) -> &'static str {
        match self {
            GenKind::Lognormal => "lognormal",
            GenKind::PowerSpike => "power-spike",
            GenKind::Lacunary => "lacunary",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "lognormal" => Some(GenKind::Lognormal),
            "power-spike" => Some(GenKind::PowerSpike),
            "lacunary" => Some(GenKind::Lacunary),
            _ => None,
        }
    }
}

/// Knobs of [`generate_instance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub scale: f64,
    /// Bump parameter of the default log bumps.
    pub eta: f64,
    /// Attempts to add a random cube to the branch family.
    pub extra_cubes: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { scale: 1.0, eta: 1.0, extra_cubes: 16 }
    }
}

fn random_leaf(rng: &mut ChaCha8Rng, lattice: Lattice) -> DyadicCube {
    DyadicCube::new(lattice.depth, rng.random_range(0..lattice.n_cells() as u64))
}

fn cell_centers(lattice: Lattice, i: usize) -> Vec<f64> {
    let side = math::powf(2.0, -(lattice.depth as f64));
    lattice.cell(i).index(lattice.dim).iter().map(|&k| (k as f64 + 0.5) * side).collect()
}

fn power_spike(rng: &mut ChaCha8Rng, lattice: Lattice, scale: f64) -> Vec<f64> {
    let d = lattice.dim as f64;
    let a = if scale > 0.0 { rng.random_range(-scale..=scale).max(-0.9 * d) } else { 0.0 };
    let center: Vec<f64> = (0..lattice.dim).map(|_| rng.random::<f64>()).collect();
    let floor = 0.25 * math::powf(2.0, -(lattice.depth as f64));
    (0..lattice.n_cells())
        .map(|i| {
            let x = cell_centers(lattice, i);
            let dist = math::sqrt(x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
            math::powf(dist.max(floor), a)
        })
        .collect()
}

fn lacunary(lattice: Lattice, leaf: DyadicCube, log_ratio: f64) -> Vec<f64> {
    let d = lattice.dim;
    (0..lattice.n_cells())
        .map(|i| {
            let cell = lattice.cell(i);
            let k = (0..=lattice.depth).rev().find(|&k| cell.ancestor(k, d) == leaf.ancestor(k, d)).unwrap_or(0);
            math::powf(2.0, log_ratio * k as f64)
        })
        .collect()
}

/// The chain of cubes from the root to `leaf`, plus random cubes that keep
/// the family `1/2`-sparse. In one dimension the chain uses every other
/// level, since a full chain already covers half of each member.
pub fn branch_family(rng: &mut impl Rng, lattice: Lattice, leaf: DyadicCube, extra: usize) -> Result<SparseCollection> {
    let d = lattice.dim;
    let stride = if d == 1 { 2 } else { 1 };
    let chain: Vec<DyadicCube> = (0..=lattice.depth).step_by(stride).map(|k| leaf.ancestor(k, d)).collect();
    let mut family = SparseCollection::verified(lattice, &chain, 0.5)?;
    for _ in 0..extra {
        let level = rng.random_range(1..=lattice.depth);
        let q = DyadicCube::new(level, rng.random_range(0..lattice.cubes_at_level(level) as u64));
        if let Some(next) = family.with_cube(q)? {
            family = next;
        }
    }
    Ok(family)
}

/// Generates one instance; identical arguments give identical instances.
pub fn generate_instance(kind: GenKind, dim: u32, depth: u32, p: f64, seed: u64, config: &GenConfig) -> Result<Instance> {
    let lattice = Lattice::new(dim, depth)?;
    if !(config.scale >= 0.0 && config.scale.is_finite()) {
        return Err(invalid("scale", "must be a finite nonnegative real"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = lattice.n_cells();
    let (s, w) = match kind {
        GenKind::Lognormal => {
            let normal = Normal::new(0.0, config.scale).map_err(|_| invalid("scale", "invalid spread"))?;
            let s: Vec<f64> = (0..n).map(|_| math::exp(normal.sample(&mut rng))).collect();
            let w: Vec<f64> = (0..n).map(|_| math::exp(normal.sample(&mut rng))).collect();
            (s, w)
        }
        GenKind::PowerSpike => {
            let s = power_spike(&mut rng, lattice, config.scale);
            let w = power_spike(&mut rng, lattice, config.scale);
            (s, w)
        }
        GenKind::Lacunary => {
            let leaf = random_leaf(&mut rng, lattice);
            let span = 1.5 * config.scale;
            let (rs, rw) = if span > 0.0 { (rng.random_range(-span..=span), rng.random_range(-span..=span)) } else { (0.0, 0.0) };
            (lacunary(lattice, leaf, rs), lacunary(lattice, leaf, rw))
        }
    };
    let leaf = random_leaf(&mut rng, lattice);
    let collection = branch_family(&mut rng, lattice, leaf, config.extra_cubes)?;
    let (a, b, eps_p, eps_pp) = default_bumps(p, config.eta)?;
    Instance::new(WeightGrid::new(dim, depth, s)?, WeightGrid::new(dim, depth, w)?, collection, p, a, b, eps_p, eps_pp, seed)
}

/// What the search maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `‖T‖ / (⌈σ,w⌉_{Ā,ε_p,p'} + ⌈w,σ⌉_{B̄,ε_{p'},p})`.
    TheoremRatio,
    /// `‖T‖ / ([σ,w]_{Ā,p'} + [w,σ]_{B̄,p})`.
    ConjectureRatio,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::TheoremRatio => "theorem-ratio",
            Objective::ConjectureRatio => "conjecture-ratio",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "theorem-ratio" => Some(Objective::TheoremRatio),
            "conjecture-ratio" => Some(Objective::ConjectureRatio),
            _ => None,
        }
    }
}

/// Constants and objectives of one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub norm: f64,
    pub norm_converged: bool,
    /// `⌈σ,w⌉_{Ā,ε_p,p'}`.
    pub entangled_sw: f64,
    /// `⌈w,σ⌉_{B̄,ε_{p'},p}`.
    pub entangled_ws: f64,
    /// `[σ,w]_{Ā,p'}`.
    pub separated_sw: f64,
    /// `[w,σ]_{B̄,p}`.
    pub separated_ws: f64,
    /// `None` when the denominator vanishes.
    pub theorem_ratio: Option<f64>,
    pub conjecture_ratio: Option<f64>,
    /// `min(ε_p(2), ε_{p'}(2))`.
    pub eps_floor: f64,
}

impl Evaluation {
    pub fn objective(&self, kind: Objective) -> Option<f64> {
        match kind {
            Objective::TheoremRatio => self.theorem_ratio,
            Objective::ConjectureRatio => self.conjecture_ratio,
        }
    }

    /// `theorem-ratio ≤ conjecture-ratio / ε_floor`, which follows from
    /// `ε(1 + ρ) ≥ ε(2)` cube by cube.
    pub fn floor_relation_holds(&self) -> bool {
        match (self.theorem_ratio, self.conjecture_ratio) {
            (Some(t), Some(c)) => t <= c / self.eps_floor * (1.0 + 1e-9),
            _ => true,
        }
    }
}

/// Settings of the norm oracle during a search; evaluation of a single
/// instance uses [`OracleConfig::default`].
pub fn search_oracle(seed: u64) -> OracleConfig {
    OracleConfig { restarts: 0, tol: 1e-10, max_iter: 2000, indicator_runs: 1, seed }
}

/// Caches the bump tables of an instance so that single-cell moves only
/// recompute the cubes containing that cell.
#[derive(Debug, Clone)]
pub struct Evaluator {
    instance: Instance,
    sw: BumpTable,
    ws: BumpTable,
    mode: ArgMode,
    oracle: OracleConfig,
    maximizer: Vec<f64>,
    eval: Evaluation,
}

fn ratio(norm: f64, den: f64) -> Option<f64> {
    (den > 0.0 && den.is_finite()).then(|| norm / den)
}

impl Evaluator {
    pub fn new(instance: Instance, mode: ArgMode, oracle: OracleConfig) -> Result<Self> {
        let pp = conjugate_exponent(instance.p);
        let sw = BumpTable::new(&instance.sigma, &instance.w, &instance.a.dual()?, instance.p, DEFAULT_TOL)?;
        let ws = BumpTable::new(&instance.w, &instance.sigma, &instance.b.dual()?, pp, DEFAULT_TOL)?;
        let mut e = Evaluator {
            instance,
            sw,
            ws,
            mode,
            oracle,
            maximizer: Vec::new(),
            eval: Evaluation {
                norm: 0.0,
                norm_converged: true,
                entangled_sw: 0.0,
                entangled_ws: 0.0,
                separated_sw: 0.0,
                separated_ws: 0.0,
                theorem_ratio: None,
                conjecture_ratio: None,
                eps_floor: 0.0,
            },
        };
        e.refresh(false)?;
        Ok(e)
    }

    fn refresh(&mut self, warm: bool) -> Result<()> {
        let inst = &self.instance;
        let warm_start = (warm && !self.maximizer.is_empty()).then_some(self.maximizer.as_slice());
        let est = norm_oracle(&inst.collection, &inst.sigma, &inst.w, inst.p, &self.oracle, warm_start)?;
        let entangled_sw = self.sw.entangled(&inst.eps_p, self.mode).0;
        let entangled_ws = self.ws.entangled(&inst.eps_pp, self.mode).0;
        let separated_sw = self.sw.separated().0;
        let separated_ws = self.ws.separated().0;
        self.eval = Evaluation {
            norm: est.value,
            norm_converged: est.converged,
            entangled_sw,
            entangled_ws,
            separated_sw,
            separated_ws,
            theorem_ratio: ratio(est.value, entangled_sw + entangled_ws),
            conjecture_ratio: ratio(est.value, separated_sw + separated_ws),
            eps_floor: inst.eps_p.eval(2.0).min(inst.eps_pp.eval(2.0)),
        };
        self.maximizer = est.maximizer;
        Ok(())
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn evaluation(&self) -> &Evaluation {
        &self.eval
    }

    pub fn mode(&self) -> ArgMode {
        self.mode
    }

    /// The evaluator after `mv`, or `None` if the move is not admissible
    /// (a cube addition that breaks sparseness, or removal of the root).
    pub fn after(&self, mv: &Move) -> Result<Option<Evaluator>> {
        let mut next = self.clone();
        match *mv {
            Move::Scale { weight, cell, factor } => {
                let inst = &mut next.instance;
                let target = match weight {
                    Weight::Sigma => &mut inst.sigma,
                    Weight::W => &mut inst.w,
                };
                let v = target.cells()[cell] * factor;
                *target = target.with_cell(cell, v)?;
                next.sw.update_cell(&inst.sigma, &inst.w, cell);
                next.ws.update_cell(&inst.w, &inst.sigma, cell);
            }
            Move::Toggle(q) => {
                let coll = &next.instance.collection;
                if q == DyadicCube::ROOT {
                    return Ok(None);
                }
                let updated = if coll.contains(&q) {
                    coll.without_cube(&q)?
                } else {
                    match coll.with_cube(q)? {
                        Some(c) => c,
                        None => return Ok(None),
                    }
                };
                next.instance.collection = updated;
            }
        }
        next.refresh(true)?;
        Ok(Some(next))
    }
}

/// Which weight a move rescales.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    Sigma,
    W,
}

/// A single search move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Move {
    /// Multiply one cell of one weight by `factor`.
    Scale { weight: Weight, cell: usize, factor: f64 },
    /// Add or remove one cube of the sparse family.
    Toggle(DyadicCube),
}

/// Multiplicative factors of [`Move::Scale`].
pub const FACTORS: [f64; 4] = [2.0, 0.5, 10.0, 0.1];

fn random_move(rng: &mut ChaCha8Rng, lattice: Lattice, toggle_share: f64) -> Move {
    if rng.random::<f64>() < toggle_share {
        let level = rng.random_range(1..=lattice.depth);
        let code = rng.random_range(0..lattice.cubes_at_level(level) as u64);
        Move::Toggle(DyadicCube::new(level, code))
    } else {
        Move::Scale {
            weight: if rng.random::<bool>() { Weight::Sigma } else { Weight::W },
            cell: rng.random_range(0..lattice.n_cells()),
            factor: FACTORS[rng.random_range(0..FACTORS.len())],
        }
    }
}

/// Every single move from an instance: all cell rescalings of both weights
/// and every non-root cube toggle.
pub fn neighborhood(lattice: Lattice) -> Vec<Move> {
    let mut out = Vec::new();
    for weight in [Weight::Sigma, Weight::W] {
        for cell in 0..lattice.n_cells() {
            for factor in FACTORS {
                out.push(Move::Scale { weight, cell, factor });
            }
        }
    }
    out.extend(lattice.cubes().filter(|q| q.level > 0).map(Move::Toggle));
    out
}

/// Best admissible neighbor and its objective value.
pub fn best_neighbor(ev: &Evaluator, objective: Objective) -> Result<Option<(Move, Evaluator)>> {
    let mut best: Option<(Move, Evaluator, f64)> = None;
    for mv in neighborhood(ev.instance.lattice()) {
        if let Some(next) = ev.after(&mv)? {
            if let Some(v) = next.eval.objective(objective) {
                if best.as_ref().is_none_or(|b| v > b.2) {
                    best = Some((mv, next, v));
                }
            }
        }
    }
    Ok(best.map(|(m, e, _)| (m, e)))
}

/// Annealing schedule and move mix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub steps: usize,
    /// Acceptance probability of a median-size deterioration at the start.
    pub initial_acceptance: f64,
    /// Final temperature as a fraction of the initial one.
    pub final_temperature: f64,
    /// Random moves sampled to calibrate the initial temperature.
    pub calibration: usize,
    /// Probability that a move is a cube toggle.
    pub toggle_share: f64,
    /// Take the best neighbor at every step instead of a random move.
    pub greedy: bool,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            steps: 2000,
            initial_acceptance: 0.3,
            final_temperature: 1e-3,
            calibration: 16,
            toggle_share: 0.1,
            greedy: false,
            seed: 0,
        }
    }
}

/// One line of the search trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub step: usize,
    pub current: f64,
    pub best: f64,
    pub accepted: bool,
    pub temperature: f64,
}

/// Outcome of [`local_search`].
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: Evaluator,
    pub best_value: f64,
    pub start_value: f64,
    pub trace: Vec<TraceEntry>,
    pub accepted: usize,
    /// Candidates whose objective was infinite (zero denominator).
    pub rejected_infinite: usize,
    /// Proposed moves that were not admissible.
    pub inadmissible: usize,
}

impl SearchResult {
    /// Relative improvement of the running maximum over the final quarter
    /// of the steps.
    pub fn final_quarter_gain(&self) -> f64 {
        if self.trace.is_empty() {
            return 0.0;
        }
        let cut = self.trace.len() * 3 / 4;
        let before = if cut == 0 { self.start_value } else { self.trace[cut - 1].best };
        if before > 0.0 {
            self.best_value / before - 1.0
        } else {
            0.0
        }
    }
}

/// Simulated annealing on `ln(objective)` with geometric cooling.
pub fn local_search(start: Evaluator, objective: Objective, config: &SearchConfig) -> Result<SearchResult> {
    let start_value = start.eval.objective(objective).ok_or(invalid("start", "objective has a zero denominator"))?;
    let lattice = start.instance.lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut result = SearchResult {
        best: start.clone(),
        best_value: start_value,
        start_value,
        trace: Vec::with_capacity(config.steps),
        accepted: 0,
        rejected_infinite: 0,
        inadmissible: 0,
    };
    if config.steps == 0 {
        return Ok(result);
    }

    // initial temperature from the median deterioration of random moves
    let mut drops = Vec::new();
    if !config.greedy {
        for _ in 0..config.calibration {
            let mv = random_move(&mut rng, lattice, config.toggle_share);
            if let Some(v) = start.after(&mv)?.and_then(|e| e.eval.objective(objective)) {
                let delta = math::ln(v) - math::ln(start_value);
                if delta < 0.0 {
                    drops.push(-delta);
                }
            }
        }
    }
    let t0 = math::median(&drops).map_or(0.1, |m| m / math::ln(1.0 / config.initial_acceptance));
    let cooling = math::powf(config.final_temperature, 1.0 / config.steps as f64);

    let mut current = start;
    let mut current_value = start_value;
    let mut temperature = t0;
    for step in 0..config.steps {
        let mut accepted = false;
        if config.greedy {
            if let Some((_, next)) = best_neighbor(&current, objective)? {
                let v = next.eval.objective(objective).unwrap_or(0.0);
                if v > current_value {
                    current = next;
                    current_value = v;
                    accepted = true;
                }
            }
        } else {
            let mv = random_move(&mut rng, lattice, config.toggle_share);
            match current.after(&mv)? {
                None => result.inadmissible += 1,
                Some(next) => match next.eval.objective(objective) {
                    None => result.rejected_infinite += 1,
                    Some(v) => {
                        let delta = math::ln(v) - math::ln(current_value);
                        let u: f64 = rng.random();
                        if delta >= 0.0 || u < math::exp(delta / temperature) {
                            current = next;
                            current_value = v;
                            accepted = true;
                        }
                    }
                },
            }
        }
        if accepted {
            result.accepted += 1;
            if current_value > result.best_value {
                result.best_value = current_value;
                result.best = current.clone();
            }
        }
        result.trace.push(TraceEntry { step, current: current_value, best: result.best_value, accepted, temperature });
        temperature *= cooling;
    }
    Ok(result)
}
