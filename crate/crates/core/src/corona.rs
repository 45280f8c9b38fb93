//! Stopping-time (corona) decomposition of a sparse family and empirical
//! constants for the inequalities used along the way.
//!
//! For a root `Q₀`, the tree `𝒯` stops where the `w`-average of `g` jumps by
//! the threshold factor, and `𝒮` stops where the average of `σ` jumps or a
//! member of `𝒯` is reached. Every cube then carries its minimal stopping
//! ancestors `Q^t ∈ 𝒯`, `Q^s ∈ 𝒮`, their generation gaps and a regime label.

use alloc::vec;
use alloc::vec::Vec;

use crate::bumps::{ArgMode, BumpTable, CubeBump, EpsilonFunction};
use crate::error::{invalid, Error, Result};
use crate::grid::{DyadicCube, Lattice, Pyramid, WeightGrid};
use crate::math::{self, conjugate_exponent};
use crate::orlicz::{YoungFunction, DEFAULT_TOL};
use crate::sparse::{split_sparse, SparseCollection};

/// Stopping factor used unless configured otherwise.
pub const DEFAULT_THRESHOLD: f64 = 10.0;

/// Three-way split of the cubes below one stopping pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Regime {
    /// `⟨w⟩_Q^{1/p} < 2^{2 i_T} ⟨w⟩_T^{1/p}`.
    SmallW,
    /// Not `SmallW`, and `⟨σ⟩_Q^{1/p} < 2^{-i_S/2} ⟨σ⟩_S^{1/p}`.
    SmallSigma,
    /// Neither.
    Large,
}

impl Regime {
    pub fn label(self) -> u8 {
        match self {
            Regime::SmallW => 1,
            Regime::SmallSigma => 2,
            Regime::Large => 3,
        }
    }
}

/// A node of `𝒯` or `𝒮`. `parent` and `children` index the same tree.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingCube {
    pub cube: DyadicCube,
    /// Position among the cubes of the decomposition.
    pub local: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Per-cube record of a decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoronaCube {
    pub cube: DyadicCube,
    /// Generation below the root.
    pub generation: u32,
    /// Parent among the cubes of the decomposition.
    pub parent: Option<usize>,
    /// Index of `Q^t` in the `𝒯` tree.
    pub top_t: usize,
    /// Index of `Q^s` in the `𝒮` tree.
    pub top_s: usize,
    pub i_t: u32,
    pub i_s: u32,
    pub regime: Regime,
    pub sigma_avg: f64,
    pub w_avg: f64,
    /// `⟨g⟩^w_Q`, zero when `w(Q) = 0`.
    pub g_avg: f64,
}

/// Stopping data of one root.
#[derive(Debug, Clone, PartialEq)]
pub struct CoronaDecomposition {
    lattice: Lattice,
    root: DyadicCube,
    p: f64,
    threshold: f64,
    cubes: Vec<CoronaCube>,
    tree_t: Vec<StoppingCube>,
    tree_s: Vec<StoppingCube>,
    w_mass: Vec<f64>,
    w_sharp: Vec<f64>,
    g_norm: f64,
}

fn check_inputs(lattice: Lattice, sigma: &WeightGrid, w: &WeightGrid, g: &[f64], p: f64, threshold: f64) -> Result<()> {
    sigma.same_shape(w)?;
    if sigma.lattice() != lattice {
        return Err(Error::GridMismatch);
    }
    if g.len() != lattice.n_cells() {
        return Err(Error::LengthMismatch { expected: lattice.n_cells(), got: g.len() });
    }
    if let Some(i) = g.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidWeight(i));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid("p", "must be a finite real > 1"));
    }
    if !(threshold > 1.0 && threshold.is_finite()) {
        return Err(invalid("threshold", "must be a finite real > 1"));
    }
    Ok(())
}

/// Grows a stopping tree from `local = 0`: the children of a node are the
/// maximal descendants `c` with `stop(node, c)`.
fn stopping_tree(
    cubes: &[DyadicCube],
    kids: &[Vec<usize>],
    mut stop: impl FnMut(usize, usize) -> bool,
) -> (Vec<StoppingCube>, Vec<Option<usize>>) {
    let mut index = vec![None; cubes.len()];
    index[0] = Some(0);
    let mut tree = vec![StoppingCube { cube: cubes[0], local: 0, parent: None, children: Vec::new() }];
    let mut head = 0;
    while head < tree.len() {
        let k = tree[head].local;
        let mut found = Vec::new();
        let mut stack = kids[k].clone();
        while let Some(c) = stack.pop() {
            if stop(k, c) {
                found.push(c);
            } else {
                stack.extend_from_slice(&kids[c]);
            }
        }
        found.sort_unstable();
        for c in found {
            let idx = tree.len();
            index[c] = Some(idx);
            tree[head].children.push(idx);
            tree.push(StoppingCube { cube: cubes[c], local: c, parent: Some(head), children: Vec::new() });
        }
        head += 1;
    }
    (tree, index)
}

/// Builds `𝒯`, `𝒮` and the per-cube records for the members of
/// `collection` contained in `root`. `g` is given on the finest cells in
/// Morton order.
pub fn build_corona(
    collection: &SparseCollection,
    root: &DyadicCube,
    sigma: &WeightGrid,
    w: &WeightGrid,
    g: &[f64],
    p: f64,
    threshold: f64,
) -> Result<CoronaDecomposition> {
    let lattice = collection.lattice();
    check_inputs(lattice, sigma, w, g, p, threshold)?;
    let r = collection.position(root).ok_or(Error::MissingRoot)?;

    // members below the root; sorted order puts parents first
    let n = collection.len();
    let mut local = vec![None; n];
    local[r] = Some(0);
    let mut members = vec![r];
    let mut parent = vec![None];
    for i in r + 1..n {
        if let Some(par) = collection.parent_of(i).and_then(|j| local[j]) {
            local[i] = Some(members.len());
            members.push(i);
            parent.push(Some(par));
        }
    }
    let m = members.len();
    let cubes: Vec<DyadicCube> = members.iter().map(|&i| collection.cubes()[i]).collect();
    let mut kids = vec![Vec::new(); m];
    for (k, par) in parent.iter().enumerate() {
        if let Some(par) = par {
            kids[*par].push(k);
        }
    }
    let base = collection.generation(r);
    let generation: Vec<u32> = members.iter().map(|&i| collection.generation(i) - base).collect();

    let gw: Vec<f64> = g.iter().zip(w.cells()).map(|(a, b)| a * b).collect();
    let gw = Pyramid::new(lattice, &gw);
    let g_avg: Vec<f64> = cubes
        .iter()
        .map(|q| {
            let mass = w.mass_of(q);
            if mass > 0.0 {
                gw.integral(q) / mass
            } else {
                0.0
            }
        })
        .collect();
    let s_avg: Vec<f64> = cubes.iter().map(|q| sigma.avg(q)).collect();
    let w_avg: Vec<f64> = cubes.iter().map(|q| w.avg(q)).collect();

    let (tree_t, t_index) = stopping_tree(&cubes, &kids, |k, c| g_avg[c] > threshold * g_avg[k]);
    let (tree_s, s_index) = stopping_tree(&cubes, &kids, |k, c| s_avg[c] > threshold * s_avg[k] || t_index[c].is_some());

    let mut top_t = vec![0usize; m];
    let mut top_s = vec![0usize; m];
    for k in 0..m {
        let inherited = parent[k].map(|par| (top_t[par], top_s[par])).unwrap_or((0, 0));
        top_t[k] = t_index[k].unwrap_or(inherited.0);
        top_s[k] = s_index[k].unwrap_or(inherited.1);
    }

    let e = 1.0 / p;
    let records: Vec<CoronaCube> = (0..m)
        .map(|k| {
            let t_local = tree_t[top_t[k]].local;
            let s_local = tree_s[top_s[k]].local;
            let i_t = generation[k] - generation[t_local];
            let i_s = generation[k] - generation[s_local];
            let small_w = math::powf(w_avg[k], e) < math::powf(2.0, 2.0 * i_t as f64) * math::powf(w_avg[t_local], e);
            let small_sigma = math::powf(s_avg[k], e) < math::powf(2.0, -(i_s as f64) / 2.0) * math::powf(s_avg[s_local], e);
            let regime = if small_w {
                Regime::SmallW
            } else if small_sigma {
                Regime::SmallSigma
            } else {
                Regime::Large
            };
            CoronaCube {
                cube: cubes[k],
                generation: generation[k],
                parent: parent[k],
                top_t: top_t[k],
                top_s: top_s[k],
                i_t,
                i_s,
                regime,
                sigma_avg: s_avg[k],
                w_avg: w_avg[k],
                g_avg: g_avg[k],
            }
        })
        .collect();

    let w_mass: Vec<f64> = tree_t.iter().map(|t| w.mass_of(&t.cube)).collect();
    let w_sharp: Vec<f64> =
        tree_t.iter().zip(&w_mass).map(|(t, wt)| (wt - t.children.iter().map(|&c| w_mass[c]).sum::<f64>()).max(0.0)).collect();

    let pp = conjugate_exponent(p);
    let range = lattice.cell_range(root);
    let g_norm = lattice.cell_volume() * g[range.clone()].iter().zip(&w.cells()[range]).map(|(a, b)| math::powf(*a, pp) * b).sum::<f64>();

    Ok(CoronaDecomposition { lattice, root: *root, p, threshold, cubes: records, tree_t, tree_s, w_mass, w_sharp, g_norm })
}

/// One decomposition per maximal member of `collection`.
pub fn corona_forest(
    collection: &SparseCollection,
    sigma: &WeightGrid,
    w: &WeightGrid,
    g: &[f64],
    p: f64,
    threshold: f64,
) -> Result<Vec<CoronaDecomposition>> {
    (0..collection.len())
        .filter(|&i| collection.parent_of(i).is_none())
        .map(|i| build_corona(collection, &collection.cubes()[i], sigma, w, g, p, threshold))
        .collect()
}

/// Result of [`CoronaDecomposition::invariants`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CoronaInvariants {
    /// Members of `𝒯` missing from `𝒮`.
    pub t_not_in_s: usize,
    /// Cubes with `i_S > i_T`.
    pub is_above_it: usize,
    /// Cubes whose label disagrees with a recomputation of the conditions.
    pub mislabeled: usize,
    /// Cubes counted in each regime.
    pub regimes: [usize; 3],
    pub cubes: usize,
}

impl CoronaInvariants {
    pub fn holds(&self) -> bool {
        self.t_not_in_s == 0 && self.is_above_it == 0 && self.mislabeled == 0 && self.regimes.iter().sum::<usize>() == self.cubes
    }

    pub fn merge(&mut self, other: &CoronaInvariants) {
        self.t_not_in_s += other.t_not_in_s;
        self.is_above_it += other.is_above_it;
        self.mislabeled += other.mislabeled;
        for (a, b) in self.regimes.iter_mut().zip(other.regimes) {
            *a += b;
        }
        self.cubes += other.cubes;
    }
}

impl CoronaDecomposition {
    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn root(&self) -> DyadicCube {
        self.root
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn cubes(&self) -> &[CoronaCube] {
        &self.cubes
    }

    pub fn tree_t(&self) -> &[StoppingCube] {
        &self.tree_t
    }

    pub fn tree_s(&self) -> &[StoppingCube] {
        &self.tree_s
    }

    /// `w(T)` for each member of `𝒯`.
    pub fn w_mass(&self) -> &[f64] {
        &self.w_mass
    }

    /// `w(T♯)`, where `T♯` removes the `𝒯`-children from `T`.
    pub fn w_sharp(&self) -> &[f64] {
        &self.w_sharp
    }

    /// `∫_{Q₀} g^{p'} dw`.
    pub fn g_norm(&self) -> f64 {
        self.g_norm
    }

    /// `Q^t` of cube `k`.
    pub fn q_t(&self, k: usize) -> DyadicCube {
        self.tree_t[self.cubes[k].top_t].cube
    }

    /// `Q^s` of cube `k`.
    pub fn q_s(&self, k: usize) -> DyadicCube {
        self.tree_s[self.cubes[k].top_s].cube
    }

    /// Whether cell `i` lies in `T♯` for the `𝒯`-member `t`.
    pub fn in_sharp(&self, t: usize, i: usize) -> bool {
        let d = self.lattice.dim;
        let cell = self.lattice.cell(i);
        let node = &self.tree_t[t];
        node.cube.contains(&cell, d) && !node.children.iter().any(|&c| self.tree_t[c].cube.contains(&cell, d))
    }

    /// `g_T` on the cells of `T`: `⟨g⟩^w_T` on `T♯` and `⟨g⟩^w_{T'}` on each
    /// `𝒯`-child `T'`.
    pub fn g_block(&self, t: usize) -> Vec<f64> {
        let node = &self.tree_t[t];
        let d = self.lattice.dim;
        let own = self.cubes[node.local].g_avg;
        self.lattice
            .cell_range(&node.cube)
            .map(|i| {
                let cell = self.lattice.cell(i);
                node.children
                    .iter()
                    .find(|&&c| self.tree_t[c].cube.contains(&cell, d))
                    .map_or(own, |&c| self.cubes[self.tree_t[c].local].g_avg)
            })
            .collect()
    }

    /// Rechecks the structural properties of the decomposition.
    pub fn invariants(&self) -> CoronaInvariants {
        let mut out = CoronaInvariants { cubes: self.cubes.len(), ..CoronaInvariants::default() };
        out.t_not_in_s = self.tree_t.iter().filter(|t| !self.tree_s.iter().any(|s| s.cube == t.cube)).count();
        let e = 1.0 / self.p;
        for q in &self.cubes {
            if q.i_s > q.i_t {
                out.is_above_it += 1;
            }
            let t = &self.cubes[self.tree_t[q.top_t].local];
            let s = &self.cubes[self.tree_s[q.top_s].local];
            let c1 = math::powf(q.w_avg, e) < math::powf(2.0, 2.0 * q.i_t as f64) * math::powf(t.w_avg, e);
            let c2 = math::powf(q.sigma_avg, e) < math::powf(2.0, -(q.i_s as f64) / 2.0) * math::powf(s.sigma_avg, e);
            let expected = match (c1, c2) {
                (true, _) => Regime::SmallW,
                (false, true) => Regime::SmallSigma,
                (false, false) => Regime::Large,
            };
            if expected != q.regime {
                out.mislabeled += 1;
            }
            out.regimes[q.regime.label() as usize - 1] += 1;
        }
        out
    }
}

/// Everything the lemma audit needs about the bump side: the averages
/// `⟨σ^{1/p}⟩_{A,Q}` and `⟨σ^{1/p'}⟩_{Ā,Q}` on every cube, with `ε` and its
/// argument mode.
#[derive(Debug, Clone)]
pub struct BumpContext {
    pub p: f64,
    /// Pair `(σ, w)` with `A` and exponent `p'`: `orlicz = ⟨σ^{1/p}⟩_{A,Q}`.
    pub primal: BumpTable,
    /// Pair `(σ, w)` with `Ā` and exponent `p`: `orlicz = ⟨σ^{1/p'}⟩_{Ā,Q}`.
    pub dual: BumpTable,
    pub eps: EpsilonFunction,
    pub mode: ArgMode,
}

impl BumpContext {
    pub fn new(sigma: &WeightGrid, w: &WeightGrid, a: &YoungFunction, eps: &EpsilonFunction, p: f64, mode: ArgMode) -> Result<Self> {
        let dual = a.dual()?;
        Ok(BumpContext {
            p,
            primal: BumpTable::new(sigma, w, a, conjugate_exponent(p), DEFAULT_TOL)?,
            dual: BumpTable::new(sigma, w, &dual, p, DEFAULT_TOL)?,
            eps: *eps,
            mode,
        })
    }

    fn dual_entry(&self, q: &DyadicCube) -> &CubeBump {
        self.dual.get(q)
    }

    /// `⟨σ^{1/p}⟩_{A,Q}`.
    pub fn primal_avg(&self, q: &DyadicCube) -> f64 {
        self.primal.get(q).orlicz
    }

    /// `ρ(Q)`; `None` when `σ(Q) = 0`.
    pub fn rho(&self, q: &DyadicCube) -> Option<f64> {
        self.dual_entry(q).rho(self.p)
    }

    /// `ε(arg(ρ(Q)))`.
    pub fn eps_at(&self, q: &DyadicCube) -> Option<f64> {
        self.rho(q).map(|r| self.eps.eval(self.mode.argument(r)))
    }

    /// `ψ(Q) = ε(arg) ⟨σ^{1/p'}⟩_{Ā,Q} ⟨w⟩_Q^{1/p}`.
    pub fn psi(&self, q: &DyadicCube) -> Option<f64> {
        self.dual_entry(q).entangled(&self.eps, self.p, self.mode)
    }
}

/// Cubes whose `ψ` lies in `(ψ_max 2^{-j-1}, ψ_max 2^{-j}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    /// `None` for the cubes with `ψ = 0` or `σ(Q) = 0`.
    pub j: Option<u32>,
    /// `ψ_max 2^{-j}`; zero for the null stratum.
    pub alpha: f64,
    pub psi_min: f64,
    pub psi_max: f64,
    pub collection: SparseCollection,
}

/// `⌊log₂(ψ_max / ψ)⌋`, or `None` when `ψ` is not positive.
pub fn stratum_index(psi_max: f64, psi: f64) -> Option<u32> {
    (psi > 0.0 && psi_max >= psi).then(|| math::floor(math::log2(psi_max / psi)) as u32)
}

/// Partitions `collection` by the dyadic size of `ψ`. Strata come in
/// increasing `j` with the null stratum, if any, last.
pub fn alpha_strata(collection: &SparseCollection, ctx: &BumpContext) -> Result<Vec<Stratum>> {
    let psi: Vec<Option<f64>> = collection.cubes().iter().map(|q| ctx.psi(q).filter(|v| *v > 0.0)).collect();
    let psi_max = psi.iter().flatten().copied().fold(0.0, f64::max);
    let mut groups: alloc::collections::BTreeMap<Option<u32>, Vec<(DyadicCube, f64)>> = Default::default();
    for (q, v) in collection.cubes().iter().zip(&psi) {
        let j = v.and_then(|v| stratum_index(psi_max, v));
        groups.entry(j).or_default().push((*q, v.unwrap_or(0.0)));
    }
    let mut out = Vec::new();
    let mut null = None;
    for (j, members) in groups {
        let cubes: Vec<DyadicCube> = members.iter().map(|m| m.0).collect();
        let stratum = Stratum {
            j,
            alpha: j.map_or(0.0, |j| psi_max * math::powf(2.0, -(j as f64))),
            psi_min: members.iter().map(|m| m.1).fold(f64::INFINITY, f64::min),
            psi_max: members.iter().map(|m| m.1).fold(0.0, f64::max),
            collection: SparseCollection::new(collection.lattice(), &cubes, collection.theta())?,
        };
        if j.is_none() {
            null = Some(stratum);
        } else {
            out.push(stratum);
        }
    }
    out.extend(null);
    Ok(out)
}

/// Empirical constants of the corona lemmas. Ratios are maxima over the
/// stopping cubes `T` (or over cubes `Q` for the per-cube steps).
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    /// `Σ_{Q^t=T} ⟨σ⟩_Q ⟨w⟩_Q |Q|` over `α · core(T)`, with
    /// `core(T) = [Σ_{Q^t=T} ⟨σ^{1/p}⟩_{A,Q}^p |Q|]^{1/p} w(T)^{1/p'}`.
    pub s: f64,
    /// Same sum restricted to `⟨w⟩_Q^{1/p} < 2^{2 i_T} ⟨w⟩_T^{1/p}`.
    pub s1: f64,
    /// Restricted to `⟨σ⟩_Q^{1/p} < 2^{-i_S/2} ⟨σ⟩_{Q^s}^{1/p}`.
    pub s2: f64,
    /// The `s2` sum against the core built from the `𝒮`-cubes of `T`.
    pub s2_stopping_core: f64,
    /// Regime-3 sum against `core(T)`.
    pub s3: f64,
    /// Regime-3 sum against `α [Σ_{Q^t=T} ⟨σ^{1/p}⟩_{A,Q} |Q|]^{1/p} w(T)^{1/p}`.
    pub s3_literal: f64,
    /// `Σ_T (⟨g⟩^w_T)^{p'} w(T) / ‖g‖_{L^{p'}(w)}^{p'}`.
    pub quasi_orthogonality: f64,
    /// `max_x Σ_{Q^t=T, regime 3} ε(ρ(Q))^{-p'} 1_Q(x)`.
    pub pointwise_sum: f64,
    /// `max ρ(Q) 2^{i_T/2} / ρ(T)` over regime-3 cubes.
    pub decrease: f64,
    /// `(i_T, ρ(Q)/ρ(T))` for every regime-3 cube.
    pub decrease_samples: Vec<(u32, f64)>,
    /// `max ⟨σ⟩_Q / (⟨σ^{1/p}⟩_{A,Q} ⟨σ^{1/p'}⟩_{Ā,Q})`.
    pub holder: f64,
    /// `max ⟨σ⟩_Q ⟨w⟩_Q / (α ⟨σ^{1/p}⟩_{A,Q} ⟨w⟩_Q^{1/p'})`.
    pub zs2w: f64,
    /// `max ε(ρ(Q)) ⟨σ⟩_Q ⟨w⟩_Q^{1/p} / (α ⟨σ^{1/p}⟩_{A,Q})`.
    pub sw: f64,
    /// `min w(T♯) / w(T)` over `T` with `w(T) > 0`.
    pub sharp_min: f64,
    /// Stopping cubes with `w(T♯) < w(T)/2`.
    pub sharp_failures: usize,
    /// Stopping cubes skipped because `w(T) = 0` or the core vanishes.
    pub skipped: usize,
    pub stopping_t: usize,
    pub stopping_s: usize,
    pub regimes: [usize; 3],
}

impl Default for LemmaReport {
    fn default() -> Self {
        LemmaReport {
            s: 0.0,
            s1: 0.0,
            s2: 0.0,
            s2_stopping_core: 0.0,
            s3: 0.0,
            s3_literal: 0.0,
            quasi_orthogonality: 0.0,
            pointwise_sum: 0.0,
            decrease: 0.0,
            decrease_samples: Vec::new(),
            holder: 0.0,
            zs2w: 0.0,
            sw: 0.0,
            sharp_min: 1.0,
            sharp_failures: 0,
            skipped: 0,
            stopping_t: 0,
            stopping_s: 0,
            regimes: [0; 3],
        }
    }
}

impl LemmaReport {
    /// Combines two reports by taking maxima (minimum for `sharp_min`) and
    /// adding counts.
    pub fn merge(&mut self, o: &LemmaReport) {
        self.s = self.s.max(o.s);
        self.s1 = self.s1.max(o.s1);
        self.s2 = self.s2.max(o.s2);
        self.s2_stopping_core = self.s2_stopping_core.max(o.s2_stopping_core);
        self.s3 = self.s3.max(o.s3);
        self.s3_literal = self.s3_literal.max(o.s3_literal);
        self.quasi_orthogonality = self.quasi_orthogonality.max(o.quasi_orthogonality);
        self.pointwise_sum = self.pointwise_sum.max(o.pointwise_sum);
        self.decrease = self.decrease.max(o.decrease);
        self.decrease_samples.extend_from_slice(&o.decrease_samples);
        self.holder = self.holder.max(o.holder);
        self.zs2w = self.zs2w.max(o.zs2w);
        self.sw = self.sw.max(o.sw);
        self.sharp_min = self.sharp_min.min(o.sharp_min);
        self.sharp_failures += o.sharp_failures;
        self.skipped += o.skipped;
        self.stopping_t += o.stopping_t;
        self.stopping_s += o.stopping_s;
        for (a, b) in self.regimes.iter_mut().zip(o.regimes) {
            *a += b;
        }
    }

    /// Median of `ρ(Q)/ρ(T)` for each value of `i_T`, in increasing `i_T`.
    pub fn decrease_medians(&self) -> Vec<(u32, f64)> {
        let mut keys: Vec<u32> = self.decrease_samples.iter().map(|s| s.0).collect();
        keys.sort_unstable();
        keys.dedup();
        keys.into_iter()
            .filter_map(|k| {
                let vals: Vec<f64> = self.decrease_samples.iter().filter(|s| s.0 == k).map(|s| s.1).collect();
                math::median(&vals).map(|m| (k, m))
            })
            .collect()
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Measures the corona inequalities on one decomposition with the stratum
/// value `alpha`.
pub fn lemma_report(dec: &CoronaDecomposition, alpha: f64, ctx: &BumpContext) -> LemmaReport {
    let p = dec.p;
    let pp = conjugate_exponent(p);
    let d = dec.lattice.dim;
    let cubes = &dec.cubes;
    let mut rep = LemmaReport { stopping_t: dec.tree_t.len(), stopping_s: dec.tree_s.len(), ..LemmaReport::default() };
    let volume: Vec<f64> = cubes.iter().map(|q| q.cube.volume(d)).collect();
    let primal: Vec<f64> = cubes.iter().map(|q| ctx.primal_avg(&q.cube)).collect();
    let rho: Vec<Option<f64>> = cubes.iter().map(|q| ctx.rho(&q.cube)).collect();

    // per-cube Hölder steps
    for (k, q) in cubes.iter().enumerate() {
        rep.regimes[q.regime.label() as usize - 1] += 1;
        let dual = ctx.dual.get(&q.cube).orlicz;
        let prod = q.sigma_avg * q.w_avg;
        if primal[k] > 0.0 && dual > 0.0 {
            rep.holder = rep.holder.max(q.sigma_avg / (primal[k] * dual));
        }
        if primal[k] > 0.0 && alpha > 0.0 {
            rep.zs2w = rep.zs2w.max(ratio(prod, alpha * primal[k] * math::powf(q.w_avg, 1.0 / pp)));
            if let Some(eps) = ctx.eps_at(&q.cube) {
                let num = eps * q.sigma_avg * math::powf(q.w_avg, 1.0 / p);
                rep.sw = rep.sw.max(ratio(num, alpha * primal[k]));
            }
        }
    }

    // running sums of ε^{-p'} along chains inside each block
    let mut chain = vec![0.0; cubes.len()];
    for (k, q) in cubes.iter().enumerate() {
        let own = match (q.regime, rho[k]) {
            (Regime::Large, Some(r)) => math::powf(ctx.eps.eval(ctx.mode.argument(r)), -pp),
            _ => 0.0,
        };
        let above = q.parent.filter(|&par| cubes[par].top_t == q.top_t).map_or(0.0, |par| chain[par]);
        chain[k] = own + above;
        rep.pointwise_sum = rep.pointwise_sum.max(chain[k]);
    }

    let mut orth = 0.0;
    for (ti, t) in dec.tree_t.iter().enumerate() {
        let wt = dec.w_mass[ti];
        orth += math::powf(cubes[t.local].g_avg, pp) * wt;
        if wt > 0.0 {
            let frac = dec.w_sharp[ti] / wt;
            rep.sharp_min = rep.sharp_min.min(frac);
            if frac < 0.5 {
                rep.sharp_failures += 1;
            }
        }
        let (mut lhs, mut lhs1, mut lhs2, mut lhs3) = (0.0, 0.0, 0.0, 0.0);
        let (mut core, mut core_lit, mut core_s) = (0.0, 0.0, 0.0);
        let rho_t = rho[t.local];
        for (k, q) in cubes.iter().enumerate().filter(|(_, q)| q.top_t == ti) {
            let term = q.sigma_avg * q.w_avg * volume[k];
            lhs += term;
            let t_w = cubes[t.local].w_avg;
            let s_sigma = cubes[dec.tree_s[q.top_s].local].sigma_avg;
            if math::powf(q.w_avg, 1.0 / p) < math::powf(2.0, 2.0 * q.i_t as f64) * math::powf(t_w, 1.0 / p) {
                lhs1 += term;
            }
            if math::powf(q.sigma_avg, 1.0 / p) < math::powf(2.0, -(q.i_s as f64) / 2.0) * math::powf(s_sigma, 1.0 / p) {
                lhs2 += term;
            }
            if q.regime == Regime::Large {
                lhs3 += term;
                if let (Some(rq), Some(rt)) = (rho[k], rho_t) {
                    let r = rq / rt;
                    rep.decrease = rep.decrease.max(r * math::powf(2.0, q.i_t as f64 / 2.0));
                    rep.decrease_samples.push((q.i_t, r));
                }
            }
            core += math::powf(primal[k], p) * volume[k];
            core_lit += primal[k] * volume[k];
            if dec.tree_s[q.top_s].local == k {
                core_s += math::powf(primal[k], p) * volume[k];
            }
        }
        if wt <= 0.0 || core <= 0.0 || alpha <= 0.0 {
            rep.skipped += 1;
            continue;
        }
        let full = alpha * math::powf(core, 1.0 / p) * math::powf(wt, 1.0 / pp);
        rep.s = rep.s.max(lhs / full);
        rep.s1 = rep.s1.max(lhs1 / full);
        rep.s2 = rep.s2.max(lhs2 / full);
        rep.s3 = rep.s3.max(lhs3 / full);
        if core_s > 0.0 {
            let stop = alpha * math::powf(core_s, 1.0 / p) * math::powf(wt, 1.0 / pp);
            rep.s2_stopping_core = rep.s2_stopping_core.max(lhs2 / stop);
        }
        let literal = alpha * math::powf(core_lit, 1.0 / p) * math::powf(wt, 1.0 / p);
        rep.s3_literal = rep.s3_literal.max(ratio(lhs3, literal));
    }
    if dec.g_norm > 0.0 {
        rep.quasi_orthogonality = orth / dec.g_norm;
    }
    rep
}

/// `(T_σ 1)^{p-1}` on the cells, with `T_σ 1 = Σ_Q ⟨σ⟩_Q 1_Q`: the dual
/// function that saturates the σ-testing inequality on the root.
pub fn testing_dual_function(collection: &SparseCollection, sigma: &WeightGrid, p: f64) -> Result<Vec<f64>> {
    let ones = vec![1.0; sigma.lattice().n_cells()];
    let tf = crate::sparse::apply_sparse(collection, sigma, &ones)?;
    Ok(tf.into_iter().map(|x| math::powf(x, p - 1.0)).collect())
}

/// Aggregate of the whole pipeline: split the family, stratify each part,
/// decompose every stratum and measure.
#[derive(Debug, Clone, PartialEq)]
pub struct CoronaAudit {
    pub parts: usize,
    pub strata: usize,
    pub coronas: usize,
    /// Cubes with `ψ = 0`, left out of the decompositions.
    pub null_cubes: usize,
    pub report: LemmaReport,
    pub invariants: CoronaInvariants,
    /// `max_j` of `Σ_{Q' j generations down} |Q'| / (10^{-pj} |Q|)` over all
    /// parts, for `j = 1..=packing_depth`.
    pub packing: Vec<f64>,
    /// Strata whose `ψ` spread exceeds 2.
    pub wide_strata: usize,
}

impl CoronaAudit {
    /// Packing holds up to rounding in the final comparison.
    pub fn packing_holds(&self) -> bool {
        self.packing.iter().all(|r| *r <= 1.0 + 1e-12)
    }
}

/// Runs the full corona audit of a `1/2`-sparse family.
#[allow(clippy::too_many_arguments)]
pub fn corona_audit(
    collection: &SparseCollection,
    sigma: &WeightGrid,
    w: &WeightGrid,
    g: &[f64],
    ctx: &BumpContext,
    threshold: f64,
    packing_depth: u32,
) -> Result<CoronaAudit> {
    let p = ctx.p;
    let parts = split_sparse(collection, p)?;
    let mut audit = CoronaAudit {
        parts: parts.len(),
        strata: 0,
        coronas: 0,
        null_cubes: 0,
        report: LemmaReport::default(),
        invariants: CoronaInvariants::default(),
        packing: vec![0.0; packing_depth as usize],
        wide_strata: 0,
    };
    for part in &parts {
        let theta = part.theta();
        for (j, frac) in part.packing(packing_depth).into_iter().enumerate() {
            let bound = math::powf(theta, (j + 1) as f64);
            audit.packing[j] = audit.packing[j].max(frac / bound);
        }
        for stratum in alpha_strata(part, ctx)? {
            if stratum.j.is_none() {
                audit.null_cubes += stratum.collection.len();
                continue;
            }
            audit.strata += 1;
            if stratum.psi_max > 2.0 * stratum.psi_min {
                audit.wide_strata += 1;
            }
            for dec in corona_forest(&stratum.collection, sigma, w, g, p, threshold)? {
                audit.coronas += 1;
                audit.invariants.merge(&dec.invariants());
                audit.report.merge(&lemma_report(&dec, stratum.alpha, ctx));
            }
        }
    }
    Ok(audit)
}
