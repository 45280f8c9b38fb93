//! Sparse collections, the sparse operator `T_σ f = Σ_Q ⟨σ f⟩_Q 1_Q`, Sawyer
//! testing constants, a norm oracle, and dyadic maximal functions.
//!
//! For nonnegative kernels the operator norm is attained on nonnegative
//! functions, since `|T_σ f| ≤ T_σ |f|` pointwise. The oracle therefore only
//! searches over `f ≥ 0`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::grid::{DyadicCube, Lattice, Pyramid, WeightGrid};
use crate::math::{self, conjugate_exponent};
use crate::orlicz::{luxembourg_uniform, YoungFunction, DEFAULT_TOL};

/// Outcome of [`verify_sparse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseVerdict {
    pub pass: bool,
    /// Cube with the largest covered fraction (`None` for an empty family).
    pub worst: Option<DyadicCube>,
    pub worst_fraction: f64,
}

/// A finite family of dyadic cubes with its nearest-ancestor forest.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCollection {
    lattice: Lattice,
    cubes: Vec<DyadicCube>,
    theta: f64,
    verified: bool,
    parent: Vec<Option<usize>>,
    generation: Vec<u32>,
    /// Covered fraction of each cube by its maximal strict sub-members.
    fraction: Vec<f64>,
}

fn cell_count(lattice: Lattice, q: &DyadicCube) -> u64 {
    1u64 << (lattice.dim * (lattice.depth - q.level))
}

impl SparseCollection {
    /// Builds the collection (sorted, deduplicated) and records whether it
    /// is `θ`-sparse.
    pub fn new(lattice: Lattice, cubes: &[DyadicCube], theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(invalid("theta", "must lie in (0, 1]"));
        }
        let mut cubes = cubes.to_vec();
        for q in &cubes {
            lattice.check(q)?;
        }
        cubes.sort();
        cubes.dedup();
        let index: BTreeMap<DyadicCube, usize> = cubes.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let d = lattice.dim;
        let parent: Vec<Option<usize>> =
            cubes.iter().map(|q| (0..q.level).rev().find_map(|k| index.get(&q.ancestor(k, d)).copied())).collect();
        // cubes are sorted by level, so parents precede children
        let mut generation = vec![0u32; cubes.len()];
        let mut covered = vec![0u64; cubes.len()];
        for i in 0..cubes.len() {
            if let Some(par) = parent[i] {
                generation[i] = generation[par] + 1;
                covered[par] += cell_count(lattice, &cubes[i]);
            }
        }
        let fraction: Vec<f64> = covered.iter().zip(&cubes).map(|(&c, q)| c as f64 / cell_count(lattice, q) as f64).collect();
        let verified = fraction.iter().all(|&f| f <= theta);
        Ok(SparseCollection { lattice, cubes, theta, verified, parent, generation, fraction })
    }

    /// Like [`new`](Self::new) but fails unless the family is `θ`-sparse.
    pub fn verified(lattice: Lattice, cubes: &[DyadicCube], theta: f64) -> Result<Self> {
        let c = Self::new(lattice, cubes, theta)?;
        if !c.verified {
            return Err(Error::NotSparse(c.verdict().worst_fraction));
        }
        Ok(c)
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn is_verified(&self) -> bool {
        self.verified
    }

    pub fn contains(&self, q: &DyadicCube) -> bool {
        self.cubes.binary_search(q).is_ok()
    }

    pub fn position(&self, q: &DyadicCube) -> Option<usize> {
        self.cubes.binary_search(q).ok()
    }

    /// Nearest strict ancestor inside the collection.
    pub fn parent_of(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    /// Depth in the nearest-ancestor forest (roots have generation 0).
    pub fn generation(&self, i: usize) -> u32 {
        self.generation[i]
    }

    pub fn covered_fraction(&self, i: usize) -> f64 {
        self.fraction[i]
    }

    /// Children of member `i` in the nearest-ancestor forest.
    pub fn children_of(&self, i: usize) -> Vec<usize> {
        (0..self.cubes.len()).filter(|&j| self.parent[j] == Some(i)).collect()
    }

    pub fn verdict(&self) -> SparseVerdict {
        let mut worst = None;
        let mut worst_fraction = 0.0;
        for (q, &f) in self.cubes.iter().zip(&self.fraction) {
            if worst.is_none() || f > worst_fraction {
                worst = Some(*q);
                worst_fraction = f;
            }
        }
        SparseVerdict { pass: self.verified, worst, worst_fraction }
    }

    /// Copy with `q` added; `None` if the result is no longer `θ`-sparse.
    pub fn with_cube(&self, q: DyadicCube) -> Result<Option<Self>> {
        let mut cubes = self.cubes.clone();
        cubes.push(q);
        let c = Self::new(self.lattice, &cubes, self.theta)?;
        Ok(c.verified.then_some(c))
    }

    /// Copy with `q` removed. Removing a member never breaks sparseness.
    pub fn without_cube(&self, q: &DyadicCube) -> Result<Self> {
        let cubes: Vec<DyadicCube> = self.cubes.iter().filter(|c| *c != q).copied().collect();
        Self::new(self.lattice, &cubes, self.theta)
    }

    /// Largest ratio `Σ_{Q' j generations below Q} |Q'| / |Q|` for each
    /// `j = 1..=max_j`, computed with integer cell counts.
    pub fn packing(&self, max_j: u32) -> Vec<f64> {
        let mut out = vec![0.0; max_j as usize];
        for (i, q) in self.cubes.iter().enumerate() {
            let mut sums = vec![0u64; max_j as usize];
            for (j, qq) in self.cubes.iter().enumerate() {
                let gap = self.generation[j] as i64 - self.generation[i] as i64;
                if gap >= 1 && gap as u32 <= max_j && q.strictly_contains(qq, self.lattice.dim) {
                    sums[gap as usize - 1] += cell_count(self.lattice, qq);
                }
            }
            let total = cell_count(self.lattice, q) as f64;
            for (o, s) in out.iter_mut().zip(sums) {
                *o = f64::max(*o, s as f64 / total);
            }
        }
        out
    }
}

/// Sparseness check at fraction `θ`, with the worst offender.
pub fn verify_sparse(lattice: Lattice, cubes: &[DyadicCube], theta: f64) -> Result<SparseVerdict> {
    Ok(SparseCollection::new(lattice, cubes, theta)?.verdict())
}

/// Number of parts used by [`split_sparse`]: `⌈p log₂ 10⌉`.
pub fn split_count(p: f64) -> u32 {
    math::ceil(p * math::log2(10.0)) as u32
}

/// Splits a `1/2`-sparse family by generation modulo `m = ⌈p log₂ 10⌉`; each
/// part is `10^{-p}`-sparse. Empty parts are dropped.
pub fn split_sparse(collection: &SparseCollection, p: f64) -> Result<Vec<SparseCollection>> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(invalid("p", "must be a finite positive real"));
    }
    let half = collection.verdict();
    if half.worst_fraction > 0.5 {
        return Err(Error::NotSparse(half.worst_fraction));
    }
    let m = split_count(p);
    let theta = math::powf(10.0, -p);
    let mut parts = Vec::new();
    for r in 0..m {
        let members: Vec<DyadicCube> =
            collection.cubes.iter().enumerate().filter(|(i, _)| collection.generation[*i] % m == r).map(|(_, q)| *q).collect();
        if !members.is_empty() {
            parts.push(SparseCollection::verified(collection.lattice, &members, theta)?);
        }
    }
    Ok(parts)
}

/// Dense-free evaluation of `f ↦ Σ_Q ⟨f⟩_Q 1_Q` over a fixed family.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    lattice: Lattice,
    cubes: Vec<DyadicCube>,
}

impl SparseOperator {
    pub fn new(collection: &SparseCollection) -> Self {
        SparseOperator { lattice: collection.lattice, cubes: collection.cubes.clone() }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    /// `Σ_Q ⟨h⟩_Q 1_Q` for a cell function `h` (Lebesgue averages).
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        let pyr = Pyramid::new(self.lattice, h);
        let d = self.lattice.dim;
        let mut coef: Vec<Vec<f64>> = (0..=self.lattice.depth).map(|k| vec![0.0; self.lattice.cubes_at_level(k)]).collect();
        for q in &self.cubes {
            coef[q.level as usize][q.code as usize] += pyr.average(q);
        }
        for k in 1..=self.lattice.depth as usize {
            let (upper, lower) = coef.split_at_mut(k);
            let above = &upper[k - 1];
            for (m, v) in lower[0].iter_mut().enumerate() {
                *v += above[m >> d];
            }
        }
        coef.pop().unwrap_or_default()
    }
}

/// `T_σ f = Σ_Q ⟨σ f⟩_Q 1_Q` on the finest cells.
pub fn apply_sparse(collection: &SparseCollection, sigma: &WeightGrid, f: &[f64]) -> Result<Vec<f64>> {
    check_shape(collection, sigma, f.len())?;
    let h: Vec<f64> = sigma.cells().iter().zip(f).map(|(s, x)| s * x).collect();
    Ok(SparseOperator::new(collection).apply(&h))
}

fn check_shape(collection: &SparseCollection, sigma: &WeightGrid, len: usize) -> Result<()> {
    if collection.lattice != sigma.lattice() {
        return Err(Error::GridMismatch);
    }
    if len != sigma.cells().len() {
        return Err(Error::LengthMismatch { expected: sigma.cells().len(), got: len });
    }
    Ok(())
}

/// Both Sawyer testing families and their maximizing cubes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestingReport {
    /// `max(sigma_side, w_side)`.
    pub value: f64,
    /// `max_{Q₀} [∫_{Q₀} (Σ_{Q⊆Q₀} ⟨σ⟩_Q 1_Q)^p w / σ(Q₀)]^{1/p}`.
    pub sigma_side: f64,
    pub sigma_cube: Option<DyadicCube>,
    /// Same with `(w, σ, p')`.
    pub w_side: f64,
    pub w_cube: Option<DyadicCube>,
}

fn one_side(collection: &SparseCollection, u: &WeightGrid, v: &WeightGrid, p: f64) -> (f64, Option<DyadicCube>) {
    let lattice = collection.lattice;
    let d = lattice.dim;
    let h = lattice.cell_volume();
    let mut best = (0.0, None);
    for q0 in &collection.cubes {
        let mass = u.mass_of(q0);
        if mass <= 0.0 {
            continue;
        }
        let range = lattice.cell_range(q0);
        let mut local = vec![0.0; range.len()];
        for q in collection.cubes.iter().filter(|q| q0.contains(q, d)) {
            let avg = u.avg(q);
            let r = lattice.cell_range(q);
            for x in &mut local[r.start - range.start..r.end - range.start] {
                *x += avg;
            }
        }
        let integral: f64 = local.iter().zip(&v.cells()[range]).map(|(t, vv)| math::powf(*t, p) * vv).sum::<f64>() * h;
        let value = math::powf(integral / mass, 1.0 / p);
        if best.1.is_none() || value > best.0 {
            best = (value, Some(*q0));
        }
    }
    best
}

/// Sawyer testing constant of `T_σ : L^p(σ) → L^p(w)`.
pub fn testing_constant(collection: &SparseCollection, sigma: &WeightGrid, w: &WeightGrid, p: f64) -> Result<TestingReport> {
    sigma.same_shape(w)?;
    if collection.lattice != sigma.lattice() {
        return Err(Error::GridMismatch);
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid("p", "must be a finite real > 1"));
    }
    let (s, sc) = one_side(collection, sigma, w, p);
    let (t, tc) = one_side(collection, w, sigma, conjugate_exponent(p));
    Ok(TestingReport { value: s.max(t), sigma_side: s, sigma_cube: sc, w_side: t, w_cube: tc })
}

/// Settings of [`norm_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Random positive seeds in addition to the structured ones.
    pub restarts: usize,
    /// Stop when one full step improves the value by less than `tol` (relative).
    pub tol: f64,
    pub max_iter: usize,
    /// Indicator seeds (per family) that are iterated to convergence; the
    /// rest only contribute their starting value.
    pub indicator_runs: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { restarts: 2, tol: 1e-12, max_iter: 20_000, indicator_runs: 2, seed: 0 }
    }
}

/// Lower-bound estimate of `‖T_σ‖_{L^p(σ) → L^p(w)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    /// Maximizer normalized to `‖f‖_{L^p(σ)} = 1`.
    pub maximizer: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

struct Ascent<'a> {
    op: SparseOperator,
    sigma: &'a [f64],
    w: &'a [f64],
    p: f64,
    pp: f64,
    h: f64,
}

impl Ascent<'_> {
    fn lp(&self, f: &[f64], weight: &[f64], q: f64) -> f64 {
        let s: f64 = f.iter().zip(weight).map(|(x, m)| math::powf(*x, q) * m).sum::<f64>() * self.h;
        math::powf(s, 1.0 / q)
    }

    /// `‖T_σ f‖_{L^p(w)} / ‖f‖_{L^p(σ)}` and the image `T_σ f`.
    fn ratio(&self, f: &[f64]) -> (f64, Vec<f64>) {
        let norm_f = self.lp(f, self.sigma, self.p);
        let sf: Vec<f64> = f.iter().zip(self.sigma).map(|(a, b)| a * b).collect();
        let tf = self.op.apply(&sf);
        if norm_f <= 0.0 {
            return (0.0, tf);
        }
        (self.lp(&tf, self.w, self.p) / norm_f, tf)
    }

    /// Optimal `f` against `g`: `f = k^{p'-1}` with `k = T(w g)`.
    fn f_from_g(&self, g: &[f64]) -> Vec<f64> {
        let wg: Vec<f64> = g.iter().zip(self.w).map(|(a, b)| a * b).collect();
        self.op.apply(&wg).iter().zip(self.sigma).map(|(x, s)| if *s > 0.0 { math::powf(*x, self.pp - 1.0) } else { 0.0 }).collect()
    }

    fn g_from_tf(&self, tf: &[f64]) -> Vec<f64> {
        tf.iter().zip(self.w).map(|(x, m)| if *m > 0.0 { math::powf(*x, self.p - 1.0) } else { 0.0 }).collect()
    }

    fn normalize(&self, f: &mut [f64]) {
        let n = self.lp(f, self.sigma, self.p);
        if n > 0.0 {
            for x in f.iter_mut() {
                *x /= n;
            }
        }
    }

    /// Runs the alternating ascent from `f`; returns (best value, best f,
    /// converged, iterations).
    fn run(&self, mut f: Vec<f64>, tol: f64, max_iter: usize) -> (f64, Vec<f64>, bool, usize) {
        let (mut value, mut tf) = self.ratio(&f);
        if value <= 0.0 {
            return (0.0, f, true, 0);
        }
        for it in 1..=max_iter {
            let next = self.f_from_g(&self.g_from_tf(&tf));
            let (v, t) = self.ratio(&next);
            let improved = v > value * (1.0 + tol);
            if v > value {
                value = v;
                f = next;
                tf = t;
                // keep the iterate at unit scale to avoid under/overflow
                let n = self.lp(&f, self.sigma, self.p);
                if n > 0.0 {
                    f.iter_mut().for_each(|x| *x /= n);
                    tf.iter_mut().for_each(|x| *x /= n);
                }
            }
            if !improved {
                return (value, f, true, it);
            }
        }
        (value, f, false, max_iter)
    }
}

/// Estimates the norm of `T_σ : L^p(σ) → L^p(w)` from below by alternating
/// maximization of `Λ(f, g) = Σ_Q ⟨σf⟩_Q ⟨wg⟩_Q |Q|`. Seeds: the constant
/// function, indicators `1_{Q₀}` used as `f` and as `g`, random positive
/// functions and an optional warm start.
pub fn norm_oracle(
    collection: &SparseCollection,
    sigma: &WeightGrid,
    w: &WeightGrid,
    p: f64,
    config: &OracleConfig,
    warm_start: Option<&[f64]>,
) -> Result<NormEstimate> {
    sigma.same_shape(w)?;
    check_shape(collection, sigma, sigma.cells().len())?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid("p", "must be a finite real > 1"));
    }
    let lattice = collection.lattice;
    let n = lattice.n_cells();
    let asc = Ascent {
        op: SparseOperator::new(collection),
        sigma: sigma.cells(),
        w: w.cells(),
        p,
        pp: conjugate_exponent(p),
        h: lattice.cell_volume(),
    };

    let mut best = NormEstimate { value: 0.0, maximizer: vec![0.0; n], converged: true, iterations: 0 };
    let consider = |est: (f64, Vec<f64>, bool, usize), best: &mut NormEstimate| {
        best.iterations += est.3;
        if est.0 > best.value {
            best.value = est.0;
            best.maximizer = est.1;
            best.converged = est.2;
        }
    };

    // indicator seeds: rank by their starting value, iterate the best ones
    let indicator = |q: &DyadicCube| {
        let mut v = vec![0.0; n];
        for x in &mut v[lattice.cell_range(q)] {
            *x = 1.0;
        }
        v
    };
    let mut f_seeds: Vec<(f64, usize)> = Vec::new();
    let mut g_seeds: Vec<(f64, usize)> = Vec::new();
    for (i, q) in collection.cubes.iter().enumerate() {
        let ind = indicator(q);
        let (vf, _) = asc.ratio(&ind);
        f_seeds.push((vf, i));
        // by Hölder this f does at least as well as the adjoint tested on 1_{Q₀}
        let f = asc.f_from_g(&ind);
        let (vfg, _) = asc.ratio(&f);
        g_seeds.push((vfg, i));
        let mut f0 = ind;
        asc.normalize(&mut f0);
        consider((vf, f0, true, 0), &mut best);
        let mut f1 = f;
        asc.normalize(&mut f1);
        consider((vfg, f1, true, 0), &mut best);
    }
    f_seeds.sort_by(|a, b| b.0.total_cmp(&a.0));
    g_seeds.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut starts: Vec<Vec<f64>> = Vec::new();
    starts.push(vec![1.0; n]);
    for &(_, i) in f_seeds.iter().take(config.indicator_runs) {
        starts.push(indicator(&collection.cubes[i]));
    }
    for &(_, i) in g_seeds.iter().take(config.indicator_runs) {
        starts.push(asc.f_from_g(&indicator(&collection.cubes[i])));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.restarts {
        starts.push((0..n).map(|_| rng.random_range(0.05..1.0)).collect());
    }
    if let Some(ws) = warm_start {
        if ws.len() == n {
            starts.push(ws.to_vec());
        }
    }
    for f in starts {
        let est = asc.run(f, config.tol, config.max_iter);
        consider(est, &mut best);
    }
    Ok(best)
}

/// `x ↦ max_{Q ∋ x} ⟨f⟩_{A,Q}` on the finest cells.
pub fn orlicz_maximal(f: &[f64], lattice: Lattice, a: &YoungFunction) -> Result<Vec<f64>> {
    if f.len() != lattice.n_cells() {
        return Err(Error::LengthMismatch { expected: lattice.n_cells(), got: f.len() });
    }
    if f.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidSample);
    }
    let levels: Vec<Vec<f64>> = (0..=lattice.depth)
        .map(|k| {
            (0..lattice.cubes_at_level(k) as u64)
                .map(|m| luxembourg_uniform(&f[lattice.cell_range(&DyadicCube::new(k, m))], a, DEFAULT_TOL))
                .collect()
        })
        .collect();
    Ok(max_down(lattice, levels))
}

/// `x ↦ max_{Q ∋ x} ⟨f σ⟩_Q` on the finest cells.
pub fn weighted_maximal(f: &[f64], sigma: &WeightGrid) -> Result<Vec<f64>> {
    let lattice = sigma.lattice();
    if f.len() != lattice.n_cells() {
        return Err(Error::LengthMismatch { expected: lattice.n_cells(), got: f.len() });
    }
    let h: Vec<f64> = f.iter().zip(sigma.cells()).map(|(a, b)| a * b).collect();
    let pyr = Pyramid::new(lattice, &h);
    let levels: Vec<Vec<f64>> =
        (0..=lattice.depth).map(|k| (0..lattice.cubes_at_level(k) as u64).map(|m| pyr.average(&DyadicCube::new(k, m))).collect()).collect();
    Ok(max_down(lattice, levels))
}

fn max_down(lattice: Lattice, mut levels: Vec<Vec<f64>>) -> Vec<f64> {
    let d = lattice.dim;
    for k in 1..levels.len() {
        let (upper, lower) = levels.split_at_mut(k);
        let above = &upper[k - 1];
        for (m, v) in lower[0].iter_mut().enumerate() {
            *v = v.max(above[m >> d]);
        }
    }
    levels.pop().unwrap_or_default()
}
