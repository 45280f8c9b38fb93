//! Weight constants: `A_p`, separated bumps, the ratio `ρ(Q)`, ε-functions
//! and entangled bumps.
//!
//! The generic pair `(u, v)` with exponent `p` stands for
//! `⟨u^{1/p'}⟩_{Ā,Q} ⟨v⟩_Q^{1/p}`. The pair `(σ, w, p)` gives `[σ,w]`; the
//! swapped pair `(w, σ, p')` gives `[w,σ]`.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::grid::{DyadicCube, Lattice, WeightGrid};
use crate::math::{self, conjugate_exponent};
use crate::orlicz::{luxembourg_uniform, YoungFunction, DEFAULT_TOL};

/// `max_Q ⟨w⟩_Q ⟨σ⟩_Q^{p-1}`.
pub fn ap_constant(sigma: &WeightGrid, w: &WeightGrid, p: f64) -> Result<f64> {
    sigma.same_shape(w)?;
    check_p(p)?;
    Ok(sigma.lattice().cubes().map(|q| w.avg(&q) * math::powf(sigma.avg(&q), p - 1.0)).fold(0.0, f64::max))
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid("p", "must be a finite real > 1"));
    }
    Ok(())
}

/// Which argument the ε-function receives in the entangled constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArgMode {
    /// `ε(1 + ρ(Q))`.
    #[default]
    OnePlusRho,
    /// `ε(ρ(Q))`.
    Rho,
}

impl ArgMode {
    pub fn name(self) -> &'static str {
        match self {
            ArgMode::OnePlusRho => "one-plus-rho",
            ArgMode::Rho => "rho",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "one-plus-rho" => Some(ArgMode::OnePlusRho),
            "rho" => Some(ArgMode::Rho),
            _ => None,
        }
    }

    pub fn argument(self, rho: f64) -> f64 {
        match self {
            ArgMode::OnePlusRho => 1.0 + rho,
            ArgMode::Rho => rho,
        }
    }
}

/// Averages of one weight pair on one cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeBump {
    pub cube: DyadicCube,
    /// `⟨u⟩_Q`.
    pub u_avg: f64,
    /// `⟨v⟩_Q`.
    pub v_avg: f64,
    /// `⟨u^{1/p'}⟩_{Ā,Q}`.
    pub orlicz: f64,
}

impl CubeBump {
    /// `ρ(Q) = ⟨u^{1/p'}⟩_{Ā,Q} / ⟨u⟩_Q^{1/p'}`; `None` when `u(Q) = 0`.
    pub fn rho(&self, p: f64) -> Option<f64> {
        (self.u_avg > 0.0).then(|| self.orlicz / math::powf(self.u_avg, 1.0 / conjugate_exponent(p)))
    }

    pub fn separated(&self, p: f64) -> f64 {
        self.orlicz * math::powf(self.v_avg, 1.0 / p)
    }

    /// `ε(arg) · ⟨u^{1/p'}⟩_{Ā,Q} ⟨v⟩_Q^{1/p}`, or `None` when `u(Q) = 0`.
    pub fn entangled(&self, eps: &EpsilonFunction, p: f64, mode: ArgMode) -> Option<f64> {
        self.rho(p).map(|r| eps.eval(mode.argument(r)) * self.separated(p))
    }
}

/// Per-cube averages for every cube of the lattice, stored level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpTable {
    lattice: Lattice,
    p: f64,
    tol: f64,
    young: YoungFunction,
    powered: Vec<f64>,
    entries: Vec<CubeBump>,
}

fn level_offset(lattice: Lattice, level: u32) -> usize {
    (0..level).map(|k| lattice.cubes_at_level(k)).sum()
}

impl BumpTable {
    /// Table for the pair `(u, v)`; `young` is the function used for the
    /// Orlicz average, normally the dual `Ā` of the bump.
    pub fn new(u: &WeightGrid, v: &WeightGrid, young: &YoungFunction, p: f64, tol: f64) -> Result<Self> {
        u.same_shape(v)?;
        check_p(p)?;
        let lattice = u.lattice();
        let e = 1.0 / conjugate_exponent(p);
        let powered: Vec<f64> = u.cells().iter().map(|x| math::powf(*x, e)).collect();
        let entries = lattice
            .cubes()
            .map(|q| CubeBump {
                cube: q,
                u_avg: u.avg(&q),
                v_avg: v.avg(&q),
                orlicz: luxembourg_uniform(&powered[lattice.cell_range(&q)], young, tol),
            })
            .collect();
        Ok(BumpTable { lattice, p, tol, young: young.clone(), powered, entries })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn entries(&self) -> &[CubeBump] {
        &self.entries
    }

    pub fn get(&self, q: &DyadicCube) -> &CubeBump {
        &self.entries[level_offset(self.lattice, q.level) + q.code as usize]
    }

    /// Recomputes the cubes containing finest cell `i` after `u` or `v`
    /// changed there.
    pub fn update_cell(&mut self, u: &WeightGrid, v: &WeightGrid, i: usize) {
        let e = 1.0 / conjugate_exponent(self.p);
        self.powered[i] = math::powf(u.cells()[i], e);
        let leaf = self.lattice.cell(i);
        for level in 0..=self.lattice.depth {
            let q = leaf.ancestor(level, self.lattice.dim);
            let idx = level_offset(self.lattice, level) + q.code as usize;
            self.entries[idx] = CubeBump {
                cube: q,
                u_avg: u.avg(&q),
                v_avg: v.avg(&q),
                orlicz: luxembourg_uniform(&self.powered[self.lattice.cell_range(&q)], &self.young, self.tol),
            };
        }
    }

    /// `max_Q ⟨u^{1/p'}⟩_{Ā,Q} ⟨v⟩_Q^{1/p}` and a maximizing cube.
    pub fn separated(&self) -> (f64, DyadicCube) {
        let mut best = (0.0, DyadicCube::ROOT);
        for b in &self.entries {
            let v = b.separated(self.p);
            if v > best.0 {
                best = (v, b.cube);
            }
        }
        best
    }

    /// Entangled constant over cubes with `u(Q) > 0`; the cube is `None`
    /// when every cube has `u(Q) = 0`.
    pub fn entangled(&self, eps: &EpsilonFunction, mode: ArgMode) -> (f64, Option<DyadicCube>) {
        let mut best = (0.0, None);
        for b in &self.entries {
            if let Some(v) = b.entangled(eps, self.p, mode) {
                if best.1.is_none() || v > best.0 {
                    best = (v, Some(b.cube));
                }
            }
        }
        best
    }

    /// Smallest `ρ(Q)` over cubes with `u(Q) > 0`.
    pub fn min_rho(&self) -> Option<f64> {
        self.entries.iter().filter_map(|b| b.rho(self.p)).reduce(f64::min)
    }

    /// Number of cubes skipped because `u(Q) = 0`.
    pub fn skipped(&self) -> usize {
        self.entries.iter().filter(|b| b.u_avg <= 0.0).count()
    }
}

/// `[u,v]_{Ā,p'} = max_Q ⟨u^{1/p'}⟩_{Ā,Q} ⟨v⟩_Q^{1/p}`, with `Ā` the dual of `a`.
pub fn separated_bump(u: &WeightGrid, v: &WeightGrid, a: &YoungFunction, p: f64) -> Result<f64> {
    let dual = a.dual()?;
    Ok(BumpTable::new(u, v, &dual, p, DEFAULT_TOL)?.separated().0)
}

/// `ρ(Q)` for `σ`, the Young function `a` and exponent `p`; `None` when
/// `σ(Q) = 0`.
pub fn rho(sigma: &WeightGrid, a: &YoungFunction, p: f64, q: &DyadicCube) -> Result<Option<f64>> {
    check_p(p)?;
    let lattice = sigma.lattice();
    lattice.check(q)?;
    let avg = sigma.avg(q);
    if avg <= 0.0 {
        return Ok(None);
    }
    let dual = a.dual()?;
    let e = 1.0 / conjugate_exponent(p);
    let vals: Vec<f64> = sigma.slice(q).iter().map(|x| math::powf(*x, e)).collect();
    Ok(Some(luxembourg_uniform(&vals, &dual, DEFAULT_TOL) / math::powf(avg, e)))
}

/// Entangled bump `max_Q ε(arg) ⟨u^{1/p'}⟩_{Ā,Q} ⟨v⟩_Q^{1/p}` over cubes with
/// `u(Q) > 0`.
pub fn entangled_bump(u: &WeightGrid, v: &WeightGrid, a: &YoungFunction, eps: &EpsilonFunction, p: f64, mode: ArgMode) -> Result<f64> {
    let dual = a.dual()?;
    Ok(BumpTable::new(u, v, &dual, p, DEFAULT_TOL)?.entangled(eps, mode).0)
}

/// Shapes of the ε-functions, before normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonFamily {
    /// `t^a`.
    Power { a: f64 },
    /// `(Log t)^b`.
    LogPower { b: f64 },
    /// `(Log t)^{1/p'} (Log Log t)^{1/p'} (Log Log Log t)^{(1+eta)/p'}`.
    TripleLog { eta: f64 },
}

impl EpsilonFamily {
    pub fn name(&self) -> &'static str {
        match self {
            EpsilonFamily::Power { .. } => "power",
            EpsilonFamily::LogPower { .. } => "log-power",
            EpsilonFamily::TripleLog { .. } => "triple-log",
        }
    }

    /// The single shape parameter (`a`, `b` or `eta`).
    pub fn parameter(&self) -> f64 {
        match *self {
            EpsilonFamily::Power { a } => a,
            EpsilonFamily::LogPower { b } => b,
            EpsilonFamily::TripleLog { eta } => eta,
        }
    }
}

/// A normalized ε-function `c · shape(t)` with `∫_1^∞ ε(t)^{-p'} dt/t = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonFunction {
    pub family: EpsilonFamily,
    pub c: f64,
    pub p_prime: f64,
}

/// Finds the constant `c` making `∫_1^∞ ε(t)^{-p'} dt/t = 1`.
///
/// Closed forms: `(a p')^{-1/p'}` for powers, `(b p' - 1)^{-1/p'}` for log
/// powers and `eta^{-1/p'}` for the triple log.
pub fn normalize_epsilon(family: EpsilonFamily, p_prime: f64) -> Result<EpsilonFunction> {
    check_p(p_prime)?;
    let c = match family {
        EpsilonFamily::Power { a } => {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::DivergentEpsilon);
            }
            math::powf(a * p_prime, -1.0 / p_prime)
        }
        EpsilonFamily::LogPower { b } => {
            if !(b * p_prime > 1.0 && b.is_finite()) {
                return Err(Error::DivergentEpsilon);
            }
            math::powf(b * p_prime - 1.0, -1.0 / p_prime)
        }
        EpsilonFamily::TripleLog { eta } => {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::DivergentEpsilon);
            }
            math::powf(eta, -1.0 / p_prime)
        }
    };
    Ok(EpsilonFunction { family, c, p_prime })
}

impl EpsilonFunction {
    pub fn power(a: f64, p_prime: f64) -> Result<Self> {
        normalize_epsilon(EpsilonFamily::Power { a }, p_prime)
    }

    pub fn log_power(b: f64, p_prime: f64) -> Result<Self> {
        normalize_epsilon(EpsilonFamily::LogPower { b }, p_prime)
    }

    pub fn triple_log(eta: f64, p_prime: f64) -> Result<Self> {
        normalize_epsilon(EpsilonFamily::TripleLog { eta }, p_prime)
    }

    /// `log ε(t)` expressed through `L = Log t ≥ 1`.
    fn ln_at_big_log(&self, big_l: f64) -> f64 {
        let lc = math::ln(self.c);
        match self.family {
            EpsilonFamily::Power { a } => lc + a * (big_l - 1.0),
            EpsilonFamily::LogPower { b } => lc + b * math::ln(big_l),
            EpsilonFamily::TripleLog { eta } => {
                let l1 = math::ln(big_l);
                let l2 = math::ln(1.0 + l1);
                let l3 = math::ln(1.0 + l2);
                lc + (l1 + l2) / self.p_prime + (1.0 + eta) * l3 / self.p_prime
            }
        }
    }

    /// `ε(t)`; below 1 the log families are constant and the power family
    /// keeps its closed form.
    pub fn eval(&self, t: f64) -> f64 {
        match self.family {
            EpsilonFamily::Power { a } => self.c * math::powf(t.max(0.0), a),
            _ => math::exp(self.ln_at_big_log(math::big_log(t))),
        }
    }

    /// `∫_1^∞ ε(t)^{-p'} dt/t` by adaptive quadrature in the family's
    /// natural variable, plus the analytic tail. Equals 1 up to quadrature
    /// error after normalization.
    pub fn integral(&self) -> f64 {
        let pp = self.p_prime;
        let tol = 1e-12;
        match self.family {
            EpsilonFamily::Power { a } => {
                let f = |u: f64| math::exp(-pp * self.ln_at_big_log(1.0 + u));
                let end = 40.0 / (a * pp);
                math::integrate(f, 0.0, end, tol, 64) + f(end) / (a * pp)
            }
            EpsilonFamily::LogPower { b } => {
                // u = e^s - 1, so Log t = e^s and du = e^s ds
                let f = |s: f64| math::exp(-pp * self.ln_at_big_log(math::exp(s)) + s);
                let end = (40.0 / (b * pp - 1.0)).min(700.0);
                math::integrate(f, 0.0, end, tol, 64) + f(end) / (b * pp - 1.0)
            }
            EpsilonFamily::TripleLog { eta } => {
                // Log t = exp(e^r - 1), du = Log t · e^r dr
                let f = |r: f64| {
                    let er = math::exp(r);
                    math::exp(-pp * self.ln_at_big_log(math::exp(er - 1.0)) + (er - 1.0) + r)
                };
                let end = 6.5;
                math::integrate(f, 0.0, end, tol, 64) + f(end) * (1.0 + end) / eta
            }
        }
    }

    /// Sampled monotonicity on `t = 2^{k/4}`, `k = 0..=400`.
    pub fn is_monotone(&self) -> bool {
        let vals: Vec<f64> = (0..=400).map(|k| self.eval(math::powf(2.0, k as f64 / 4.0))).collect();
        vals.windows(2).all(|w| w[1] >= w[0])
    }

    /// Smallest `M` with `ε(t) ≤ (Log t)^M` on `t = 10^k`, `k = 1..=300`.
    pub fn log_growth(&self) -> f64 {
        (1..=300)
            .map(|k| {
                let big_l = 1.0 + k as f64 * core::f64::consts::LN_10;
                self.ln_at_big_log(big_l) / math::ln(big_l)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orlicz::{luxembourg_norm, Sample};
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng, depth: u32) -> WeightGrid {
        let n = 1usize << depth;
        WeightGrid::new(1, depth, (0..n).map(|_| math::exp(rng.random_range(-2.0..2.0))).collect()).unwrap()
    }

    /// Brute-force oracle: enumerate cubes by coordinates, sum cells directly.
    fn brute_separated(u: &WeightGrid, v: &WeightGrid, dual: &YoungFunction, p: f64) -> f64 {
        let depth = u.depth();
        let n = 1usize << depth;
        let mut best = 0.0f64;
        for level in 0..=depth {
            let width = n >> level;
            for start in (0..n).step_by(width) {
                let m = 1.0 / width as f64;
                let samples: Vec<Sample> =
                    (start..start + width).map(|i| Sample::new(math::powf(u.cells()[i], 1.0 - 1.0 / p), m)).collect();
                let vavg: f64 = (start..start + width).map(|i| v.cells()[i]).sum::<f64>() * m;
                let val = luxembourg_norm(&samples, dual, 1e-12).unwrap() * math::powf(vavg, 1.0 / p);
                best = best.max(val);
            }
        }
        best
    }

    #[test]
    fn ap_examples() {
        let one = WeightGrid::constant(1, 3, 1.0).unwrap();
        assert_eq!(ap_constant(&one, &one, 2.0).unwrap(), 1.0);
        let w = WeightGrid::constant(1, 1, 1.0).unwrap();
        let s = WeightGrid::new(1, 1, vec![4.0, 0.0]).unwrap();
        assert_eq!(ap_constant(&s, &w, 2.0).unwrap(), 4.0);
    }

    #[test]
    fn ap_matches_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let s = random_grid(&mut rng, 5);
            let w = random_grid(&mut rng, 5);
            let p = 1.5;
            let mut best = 0.0f64;
            for level in 0..=5u32 {
                let width = 32usize >> level;
                for start in (0..32).step_by(width) {
                    let sa: f64 = s.cells()[start..start + width].iter().sum::<f64>() / width as f64;
                    let wa: f64 = w.cells()[start..start + width].iter().sum::<f64>() / width as f64;
                    best = best.max(wa * math::powf(sa, p - 1.0));
                }
            }
            let got = ap_constant(&s, &w, p).unwrap();
            assert!((got - best).abs() <= 1e-12 * best);
        }
    }

    #[test]
    fn separated_examples() {
        let one = WeightGrid::constant(1, 3, 1.0).unwrap();
        let a = YoungFunction::log_bump(2.0, 1.0).unwrap();
        assert!((separated_bump(&one, &one, &a, 2.0).unwrap() - 1.0).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let s = random_grid(&mut rng, 4);
            let w = random_grid(&mut rng, 4);
            for p in [1.5, 2.0, 3.0] {
                // dual of t^p is t^{p'}, which reduces the bump to A_p^{1/p}
                let pw = YoungFunction::power(p).unwrap();
                let sb = separated_bump(&s, &w, &pw, p).unwrap();
                let ap = ap_constant(&s, &w, p).unwrap();
                assert!((sb - math::powf(ap, 1.0 / p)).abs() <= 1e-9 * sb);
            }
            let dual = a.dual().unwrap();
            let got = separated_bump(&s, &w, &a, 2.0).unwrap();
            let oracle = brute_separated(&s, &w, &dual, 2.0);
            assert!((got - oracle).abs() <= 1e-8 * oracle);
        }
    }

    #[test]
    fn rho_properties() {
        let c = WeightGrid::constant(1, 3, 2.5).unwrap();
        let a = YoungFunction::log_bump(2.0, 1.0).unwrap();
        let r = rho(&c, &a, 2.0, &DyadicCube::ROOT).unwrap().unwrap();
        assert!((r - 1.0).abs() < 1e-9);
        let zero = WeightGrid::constant(1, 3, 0.0).unwrap();
        assert_eq!(rho(&zero, &a, 2.0, &DyadicCube::ROOT).unwrap(), None);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pw = YoungFunction::power(3.0).unwrap();
        for _ in 0..10 {
            let s = random_grid(&mut rng, 4);
            for q in s.lattice().cubes() {
                let r_pow = rho(&s, &pw, 3.0, &q).unwrap().unwrap();
                assert!((r_pow - 1.0).abs() < 1e-9);
                // the log-bump dual dominates t^{p'}
                assert!(rho(&s, &a, 2.0, &q).unwrap().unwrap() >= 1.0 - 1e-9);
            }
        }
    }

    #[test]
    fn epsilon_examples() {
        let e = EpsilonFunction::power(0.25, 2.0).unwrap();
        assert!((e.c - core::f64::consts::SQRT_2).abs() < 1e-12);
        let e = EpsilonFunction::power(0.5, 2.0).unwrap();
        assert!((e.c - 1.0).abs() < 1e-12);
        assert_eq!(EpsilonFunction::power(0.0, 2.0), Err(Error::DivergentEpsilon));
        assert_eq!(EpsilonFunction::log_power(0.5, 2.0), Err(Error::DivergentEpsilon));
        for eps in [
            EpsilonFunction::power(0.25, 2.0).unwrap(),
            EpsilonFunction::power(1.0 / 6.0, 3.0).unwrap(),
            EpsilonFunction::log_power(1.0, 2.0).unwrap(),
            EpsilonFunction::log_power(1.0 / 1.5 + 0.5 / 1.5, 1.5).unwrap(),
            EpsilonFunction::triple_log(1.0, 2.0).unwrap(),
            EpsilonFunction::triple_log(0.5, 3.0).unwrap(),
        ] {
            let i = eps.integral();
            assert!((i - 1.0).abs() < 1e-6, "{eps:?}: {i}");
            assert!(eps.is_monotone());
        }
        assert!(EpsilonFunction::log_power(1.0, 2.0).unwrap().log_growth() <= 1.0 + 1e-12);
    }

    #[test]
    fn entangled_examples() {
        let one = WeightGrid::constant(1, 3, 1.0).unwrap();
        let a = YoungFunction::log_bump(2.0, 1.0).unwrap();
        let eps = EpsilonFunction::power(0.25, 2.0).unwrap();
        let v = entangled_bump(&one, &one, &a, &eps, 2.0, ArgMode::OnePlusRho).unwrap();
        assert!((v - eps.eval(2.0)).abs() < 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_grid(&mut rng, 5);
        let w = random_grid(&mut rng, 5);
        let pw = YoungFunction::power(2.0).unwrap();
        let v = entangled_bump(&s, &w, &pw, &eps, 2.0, ArgMode::OnePlusRho).unwrap();
        let ap = ap_constant(&s, &w, 2.0).unwrap();
        assert!((v - eps.eval(2.0) * ap.sqrt()).abs() < 1e-8 * v);
        let sep = separated_bump(&s, &w, &a, 2.0).unwrap();
        let ent = entangled_bump(&s, &w, &a, &eps, 2.0, ArgMode::OnePlusRho).unwrap();
        assert!(ent >= eps.eval(2.0) * sep - 1e-9);
    }

    #[test]
    fn incremental_table_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = random_grid(&mut rng, 5);
        let w = random_grid(&mut rng, 5);
        let dual = YoungFunction::log_bump(2.0, 1.0).unwrap().dual().unwrap();
        let mut t = BumpTable::new(&s, &w, &dual, 2.0, 1e-12).unwrap();
        let s2 = s.with_cell(7, 40.0).unwrap();
        t.update_cell(&s2, &w, 7);
        let fresh = BumpTable::new(&s2, &w, &dual, 2.0, 1e-12).unwrap();
        assert_eq!(t.entries(), fresh.entries());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn arg_mode_order_and_scaling(seed in 0u64..1000, ci in 0usize..2, cj in 0usize..2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_grid(&mut rng, 4);
            let w = random_grid(&mut rng, 4);
            let a = YoungFunction::log_bump(2.0, 1.0).unwrap();
            let eps = EpsilonFunction::power(0.25, 2.0).unwrap();
            let rho_mode = entangled_bump(&s, &w, &a, &eps, 2.0, ArgMode::Rho).unwrap();
            let one_plus = entangled_bump(&s, &w, &a, &eps, 2.0, ArgMode::OnePlusRho).unwrap();
            prop_assert!(rho_mode <= one_plus);

            let (c, c2) = ([0.5, 3.0][ci], [0.5, 3.0][cj]);
            let p = 3.0;
            let pp = conjugate_exponent(p);
            let (sc, wc) = (s.scaled(c).unwrap(), w.scaled(c2).unwrap());
            let ap = ap_constant(&s, &w, p).unwrap();
            let ap_scaled = ap_constant(&sc, &wc, p).unwrap();
            prop_assert!((ap_scaled - c2 * math::powf(c, p - 1.0) * ap).abs() <= 1e-10 * ap_scaled);
            let sb = separated_bump(&s, &w, &a, p).unwrap();
            let sb_scaled = separated_bump(&sc, &wc, &a, p).unwrap();
            let law = math::powf(c, 1.0 / pp) * math::powf(c2, 1.0 / p);
            prop_assert!((sb_scaled - law * sb).abs() <= 1e-8 * sb_scaled);
        }
    }
}
