//! Distribution-function form of Orlicz averages, sampled weak concavity and
//! the self-improvement of log and log-log bumps.

use alloc::vec::Vec;

use rand::Rng;

use crate::bumps::{ArgMode, BumpTable, EpsilonFunction};
use crate::error::{invalid, Result};
use crate::grid::{DyadicCube, WeightGrid};
use crate::math::{self, big_log, conjugate_exponent};
use crate::orlicz::{luxembourg_uniform, Profile, YoungFunction, DEFAULT_TOL};

/// `|{x ∈ Q : σ(x) > λ}| / |Q|`, by counting cells.
pub fn distribution(sigma: &WeightGrid, q: &DyadicCube, lambda: f64) -> f64 {
    let cells = sigma.slice(q);
    cells.iter().filter(|&&v| v > lambda).count() as f64 / cells.len() as f64
}

/// `∫_0^∞ D_Q(λ) β(1/D_Q(λ)) dλ`, summed exactly over the steps of `D_Q`.
pub fn orlicz_via_distribution(sigma: &WeightGrid, q: &DyadicCube, beta: impl Fn(f64) -> f64) -> f64 {
    let mut vals = sigma.slice(q).to_vec();
    vals.sort_by(f64::total_cmp);
    let n = vals.len() as f64;
    let mut total = 0.0;
    let mut prev = 0.0;
    let mut i = 0;
    while i < vals.len() {
        let v = vals[i];
        // on [prev, v) exactly the cells from i on exceed λ
        let d = (vals.len() - i) as f64 / n;
        if v > prev {
            total += (v - prev) * d * beta(1.0 / d);
        }
        prev = prev.max(v);
        while i < vals.len() && vals[i] == v {
            i += 1;
        }
    }
    total
}

/// Which bump family a [`BetaFactor`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpCase {
    Log,
    LogLog,
}

impl BumpCase {
    pub fn name(self) -> &'static str {
        match self {
            BumpCase::Log => "log",
            BumpCase::LogLog => "loglog",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "log" => Some(BumpCase::Log),
            "loglog" => Some(BumpCase::LogLog),
            _ => None,
        }
    }
}

/// Slowly varying factors `β`, `θ` with `B(t) = t β(t)`.
///
/// Log case: `β(u) = (Log u)^{1/(p-1)+η}`, `θ(u) = (1+u)^{-η/2}` and
/// `B₀(t) = B(t) θ(Log t)`. Log-log case: `β(u) = (Log u)^{1/(p-1)}
/// (Log Log u)^{1/(p-1)+η/2}`, `θ(u) = (Log u)^{-1-η'/2}` and
/// `B₀(t) = B(t) θ(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaFactor {
    pub case: BumpCase,
    pub p: f64,
    pub eta: f64,
    pub eta_prime: f64,
}

impl BetaFactor {
    pub fn new(case: BumpCase, p: f64, eta: f64, eta_prime: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(invalid("p", "must be a finite real > 1"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(invalid("eta", "must be a finite positive real"));
        }
        if !(eta_prime > 0.0 && eta_prime.is_finite()) {
            return Err(invalid("eta_prime", "must be a finite positive real"));
        }
        Ok(BetaFactor { case, p, eta, eta_prime })
    }

    fn profile(&self) -> Profile {
        let k = 1.0 / (self.p - 1.0);
        match self.case {
            BumpCase::Log => Profile::new(1.0, k + self.eta, 0.0, 0.0),
            BumpCase::LogLog => Profile::new(1.0, k, k + self.eta / 2.0, 0.0),
        }
    }

    pub fn beta(&self, u: f64) -> f64 {
        self.profile().slow(u)
    }

    pub fn theta(&self, u: f64) -> f64 {
        match self.case {
            BumpCase::Log => math::powf(1.0 + u, -self.eta / 2.0),
            BumpCase::LogLog => math::powf(big_log(u), -1.0 - self.eta_prime / 2.0),
        }
    }

    /// `θ̃(t) = t θ(t)`.
    pub fn theta_tilde(&self, t: f64) -> f64 {
        t * self.theta(t)
    }

    pub fn beta0(&self, u: f64) -> f64 {
        match self.case {
            BumpCase::Log => self.beta(u) * self.theta(big_log(u)),
            BumpCase::LogLog => self.beta(u) * self.theta(u),
        }
    }

    /// A decreasing `θ̂` with `B₀(t) ≤ B(t) θ̂(β(t))` for `t ≥ 1`. In the
    /// log case `θ̂(s) = θ(s^{1/k})` with `k = 1/(p-1) + η`; in the log-log
    /// case `θ` itself qualifies.
    pub fn theta_matched(&self, s: f64) -> f64 {
        match self.case {
            BumpCase::Log => {
                let k = 1.0 / (self.p - 1.0) + self.eta;
                self.theta(math::powf(s.max(1.0), 1.0 / k))
            }
            BumpCase::LogLog => self.theta(s),
        }
    }

    /// `B(t) = t β(t)` as a Young function.
    pub fn young_b(&self) -> Result<YoungFunction> {
        YoungFunction::profile(self.profile())
    }

    pub fn b(&self, t: f64) -> f64 {
        t * self.beta(t)
    }

    pub fn b0(&self, t: f64) -> f64 {
        t * self.beta0(t)
    }
}

/// Outcome of [`weak_concavity_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakConcavity {
    pub pass: bool,
    /// Largest observed `Σ λ_j f(x_j) / f(Σ λ_j x_j)`, at least 1.
    pub worst: f64,
}

/// Default number of sampled convex combinations.
pub const WEAK_CONCAVITY_TRIALS: usize = 10_000;

/// Samples convex combinations of `n ≤ 8` points of `[lo, hi]` (log-uniform
/// when `lo > 0`) and records the worst constant `C` in
/// `f(Σ λ_j x_j) ≥ C^{-1} Σ λ_j f(x_j)`.
pub fn weak_concavity_check<R: Rng>(f: impl Fn(f64) -> f64, interval: (f64, f64), trials: usize, cap: f64, rng: &mut R) -> WeakConcavity {
    let (lo, hi) = interval;
    let log_scale = lo > 0.0;
    let mut worst: f64 = 1.0;
    let mut xs = [0.0; 8];
    let mut ls = [0.0; 8];
    for _ in 0..trials {
        let n = rng.random_range(2..=8);
        let mut total = 0.0;
        for j in 0..n {
            xs[j] = if log_scale { math::exp(rng.random_range(math::ln(lo)..=math::ln(hi))) } else { rng.random_range(lo..=hi) };
            ls[j] = rng.random::<f64>();
            total += ls[j];
        }
        if total <= 0.0 {
            continue;
        }
        let mut mean = 0.0;
        let mut avg_f = 0.0;
        for j in 0..n {
            let l = ls[j] / total;
            mean += l * xs[j];
            avg_f += l * f(xs[j]);
        }
        let at_mean = f(mean);
        if at_mean > 0.0 {
            worst = worst.max(avg_f / at_mean);
        }
    }
    WeakConcavity { pass: worst <= cap, worst }
}

/// Both sides of the self-improvement inequality on one cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfImprovement {
    /// `⟨σ⟩_{B₀,Q}` in distribution form.
    pub lhs: f64,
    /// `⟨σ⟩_{B,Q} θ(⟨σ⟩_{B,Q} / ⟨σ⟩_Q)`.
    pub rhs: f64,
    pub ratio: f64,
    /// `⟨σ⟩_{B,Q} θ̂(⟨σ⟩_{B,Q} / ⟨σ⟩_Q)` with [`BetaFactor::theta_matched`].
    pub rhs_matched: f64,
    pub ratio_matched: f64,
}

/// Self-improvement check on `Q`; `None` when `⟨σ⟩_Q = 0`. `⟨σ⟩_{B,Q}` is
/// the Luxembourg norm for `B`.
pub fn self_improve_check(sigma: &WeightGrid, q: &DyadicCube, factor: &BetaFactor, b: &YoungFunction) -> Option<SelfImprovement> {
    let avg = sigma.avg(q);
    if avg <= 0.0 {
        return None;
    }
    let lhs = orlicz_via_distribution(sigma, q, |u| factor.beta0(u));
    let norm_b = luxembourg_uniform(sigma.slice(q), b, DEFAULT_TOL);
    let rhs = norm_b * factor.theta(norm_b / avg);
    let rhs_matched = norm_b * factor.theta_matched(norm_b / avg);
    Some(SelfImprovement { lhs, rhs, ratio: lhs / rhs, rhs_matched, ratio_matched: lhs / rhs_matched })
}

/// Outcome of [`proposition_eta`].
#[derive(Debug, Clone, PartialEq)]
pub struct PropositionReport {
    pub case: BumpCase,
    /// `[σ,w]_{Ā,p'}` for the hypothesis bump `A`.
    pub separated: f64,
    /// `⌈σ,w⌉_{Ā₀,ε,p'}` for the weaker bump `A₀`.
    pub entangled: f64,
    /// `entangled / separated`.
    pub ratio: f64,
    /// `max_Q ⟨σ^{1/p'}⟩_{Ā₀,Q}^{p'} / (⟨σ⟩_{B,Q} θ(⟨σ⟩_{B,Q}/⟨σ⟩_Q))` with
    /// `⟨σ⟩_{B,Q} = ⟨σ^{1/p'}⟩_{Ā,Q}^{p'}`.
    pub theta_max: f64,
    /// `max_Q ε(arg)^{p'} ⟨σ^{1/p'}⟩_{Ā₀,Q}^{p'} / ⟨σ^{1/p'}⟩_{Ā,Q}^{p'}`.
    pub ep_max: f64,
    /// `∫_1^∞ ε^{-p'} dt/t` by quadrature.
    pub finite_integral: f64,
    /// Cubes with `σ(Q) = 0`.
    pub skipped: usize,
    pub a: YoungFunction,
    pub a0: YoungFunction,
    pub eps: EpsilonFunction,
}

/// The bumps and `ε` of the two cases: `(A, A₀, ε)`.
pub fn proposition_recipe(case: BumpCase, p: f64, eta: f64, eta_prime: f64) -> Result<(YoungFunction, YoungFunction, EpsilonFunction)> {
    let pp = conjugate_exponent(p);
    Ok(match case {
        BumpCase::Log => {
            (YoungFunction::log_bump(p, eta)?, YoungFunction::log_bump(p, eta / 2.0)?, EpsilonFunction::power(eta / (2.0 * pp), pp)?)
        }
        BumpCase::LogLog => (
            YoungFunction::loglog_bump(p, 1.0 + eta)?,
            YoungFunction::loglog_bump(p, eta_prime / p)?,
            EpsilonFunction::log_power(1.0 / pp + eta_prime / pp, pp)?,
        ),
    })
}

/// Compares the separated constant of `A` with the entangled constant of the
/// weaker bump `A₀` and audits the per-cube chain between them.
pub fn proposition_eta(
    sigma: &WeightGrid,
    w: &WeightGrid,
    p: f64,
    eta: f64,
    eta_prime: f64,
    case: BumpCase,
    mode: ArgMode,
) -> Result<PropositionReport> {
    let factor = BetaFactor::new(case, p, eta, eta_prime)?;
    let (a, a0, eps) = proposition_recipe(case, p, eta, eta_prime)?;
    let pp = conjugate_exponent(p);
    let strong = BumpTable::new(sigma, w, &a.dual()?, p, DEFAULT_TOL)?;
    let weak = BumpTable::new(sigma, w, &a0.dual()?, p, DEFAULT_TOL)?;
    let separated = strong.separated().0;
    let entangled = weak.entangled(&eps, mode).0;
    let mut theta_max: f64 = 0.0;
    let mut ep_max: f64 = 0.0;
    let mut skipped = 0;
    for (s, k) in strong.entries().iter().zip(weak.entries()) {
        let (Some(_), Some(rho0)) = (s.rho(p), k.rho(p)) else {
            skipped += 1;
            continue;
        };
        let norm_b = math::powf(s.orlicz, pp);
        let norm_b0 = math::powf(k.orlicz, pp);
        theta_max = theta_max.max(norm_b0 / (norm_b * factor.theta(norm_b / s.u_avg)));
        ep_max = ep_max.max(math::powf(eps.eval(mode.argument(rho0)), pp) * norm_b0 / norm_b);
    }
    Ok(PropositionReport {
        case,
        separated,
        entangled,
        ratio: if separated > 0.0 { entangled / separated } else { 0.0 },
        theta_max,
        ep_max,
        finite_integral: eps.integral(),
        skipped,
        a,
        a0,
        eps,
    })
}

/// Largest `⟨σ⟩_Q / λ` violation of `D_Q(λ) ≤ ⟨σ⟩_Q / λ` over the distinct
/// cell values `λ` of `σ` in `Q`; returns the offending count (0 when the
/// bound holds everywhere).
pub fn chebyshev_violations(sigma: &WeightGrid, q: &DyadicCube) -> usize {
    let avg = sigma.avg(q);
    let cells = sigma.slice(q);
    let n = cells.len();
    cells
        .iter()
        .filter(|&&l| l > 0.0)
        .filter(|&&l| {
            // compare counts exactly: #{σ > λ} · λ ≤ Σ σ
            let above = cells.iter().filter(|&&v| v > l).count();
            above as f64 * l > avg * n as f64
        })
        .count()
}

/// Per-cube ratios `orlicz_via_distribution / ⟨σ⟩_{B,Q}` for every cube.
pub fn distribution_ratios(sigma: &WeightGrid, factor: &BetaFactor) -> Result<Vec<f64>> {
    let b = factor.young_b()?;
    Ok(sigma
        .lattice()
        .cubes()
        .filter(|q| sigma.avg(q) > 0.0)
        .map(|q| {
            let via = orlicz_via_distribution(sigma, &q, |u| factor.beta(u));
            via / luxembourg_uniform(sigma.slice(&q), &b, DEFAULT_TOL)
        })
        .collect())
}
