//! Young functions, their duals, Luxembourg norms on probability spaces, the
//! `B_p` integral test and the generalized Hölder inequality.
//!
//! Every Young function is normalized so that `A(1) = 1`. The bump families
//! are built from their explicit dual profiles
//! `t^q (Log t)^a (Log Log t)^b`, which are convex, and the primal function is
//! the (rescaled) Legendre conjugate of that profile. This keeps every family
//! a genuine Young function while matching the classical asymptotics
//! `t^p (Log t)^{-1-(p-1)eta}` and `t^p (Log t)^{-1} (Log Log t)^{-1-(p-1)eta}`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::{self, big_log, big_loglog, conjugate_exponent};

/// Constant used for the generalized Hölder inequality
/// `∫ f g dμ ≤ C ‖f‖_A ‖g‖_Ā` when the duality constant of `A` is at most 1.
pub const HOLDER_CONSTANT: f64 = 2.0;

/// Default relative tolerance of [`luxembourg_norm`].
pub const DEFAULT_TOL: f64 = 1e-9;

/// Number of log-spaced nodes used by [`numeric_dual`].
pub const DUAL_NODES: usize = 2048;

const DUAL_GRID_MIN: f64 = 1e-8;
const DUAL_GRID_MAX: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YoungFamily {
    Power,
    LogBump,
    LogLogBump,
    /// Explicit product `t^q (Log t)^a (Log Log t)^b (1 + Log t)^c`.
    Profile,
    Tabulated,
}

impl YoungFamily {
    pub fn name(self) -> &'static str {
        match self {
            YoungFamily::Power => "power",
            YoungFamily::LogBump => "log-bump",
            YoungFamily::LogLogBump => "loglog-bump",
            YoungFamily::Profile => "profile",
            YoungFamily::Tabulated => "tabulated",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "power" => YoungFamily::Power,
            "log-bump" => YoungFamily::LogBump,
            "loglog-bump" => YoungFamily::LogLogBump,
            "profile" => YoungFamily::Profile,
            "tabulated" => YoungFamily::Tabulated,
            _ => return None,
        })
    }
}

/// Whether a descriptor denotes the bump `A` itself or its dual `Ā`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Primal,
    Dual,
}

impl Side {
    fn flip(self) -> Self {
        match self {
            Side::Primal => Side::Dual,
            Side::Dual => Side::Primal,
        }
    }
}

/// `t^power (Log t)^log (Log Log t)^loglog (1 + Log t)^log_shift`, divided by
/// its value at 1 so that the profile equals `t^power` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub power: f64,
    pub log: f64,
    pub loglog: f64,
    pub log_shift: f64,
}

impl Profile {
    pub fn new(power: f64, log: f64, loglog: f64, log_shift: f64) -> Self {
        Profile { power, log, loglog, log_shift }
    }

    /// Slowly varying part; equals 1 on `[0, 1]`.
    pub fn slow(&self, t: f64) -> f64 {
        if t <= 1.0 {
            return 1.0;
        }
        let l = big_log(t);
        let mut v = 1.0;
        if self.log != 0.0 {
            v *= math::powf(l, self.log);
        }
        if self.loglog != 0.0 {
            v *= math::powf(big_log(l), self.loglog);
        }
        if self.log_shift != 0.0 {
            v *= math::powf(0.5 * (1.0 + l), self.log_shift);
        }
        v
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        math::powf(t, self.power) * self.slow(t)
    }

    /// Derivative; at `t = 1` the right derivative is returned.
    pub fn derivative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return if self.power > 1.0 { 0.0 } else { self.power };
        }
        if t < 1.0 {
            return self.power * math::powf(t, self.power - 1.0);
        }
        let l = big_log(t);
        let ll = big_log(l);
        let log_derivative = self.power + self.log / l + self.loglog / (l * ll) + self.log_shift / (1.0 + l);
        self.eval(t) / t * log_derivative
    }

    fn left_derivative_at_one(&self) -> f64 {
        self.power
    }

    fn right_derivative_at_one(&self) -> f64 {
        self.power + self.log + self.loglog + 0.5 * self.log_shift
    }

    /// Maximizer `s` of `x s - G(s)`, i.e. the inverse of `G'` at `x`.
    fn conjugate_argmax(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let q = self.power;
        let left = self.left_derivative_at_one();
        if x <= left {
            return math::powf(x / q, 1.0 / (q - 1.0));
        }
        if x <= self.right_derivative_at_one() {
            return 1.0;
        }
        let target = math::ln(x);
        let h = |y: f64| math::ln(self.derivative(math::exp(y))) - target;
        let mut hi = 1.0;
        while h(hi) < 0.0 && hi < 700.0 {
            hi *= 2.0;
        }
        let y = math::solve_bracketed(h, 0.0, hi, 1e-15 * hi.max(1.0), 200);
        math::exp(y)
    }

    /// Legendre conjugate `G*(x) = sup_s (x s - G(s))`.
    fn conjugate(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let q = self.power;
        if x <= self.left_derivative_at_one() {
            return (q - 1.0) * math::powf(x / q, q / (q - 1.0));
        }
        let s = self.conjugate_argmax(x);
        (x * s - self.eval(s)).max(0.0)
    }
}

/// Monotone samples `(t_i, A(t_i))` interpolated linearly in log-log scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    ts: Vec<f64>,
    values: Vec<f64>,
}

impl Table {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("table", "needs at least two points"));
        }
        for (i, &(t, a)) in points.iter().enumerate() {
            if !(t > 0.0 && a > 0.0 && t.is_finite() && a.is_finite()) {
                return Err(Error::NonMonotoneTable(i));
            }
            if i > 0 {
                let (t0, a0) = points[i - 1];
                if !(t > t0 && a > a0) {
                    return Err(Error::NonMonotoneTable(i));
                }
            }
        }
        Ok(Table { ts: points.iter().map(|p| p.0).collect(), values: points.iter().map(|p| p.1).collect() })
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ts.iter().copied().zip(self.values.iter().copied())
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.ts.len();
        match self.ts.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    fn slope(&self, i: usize) -> f64 {
        math::ln(self.values[i + 1] / self.values[i]) / math::ln(self.ts[i + 1] / self.ts[i])
    }

    fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let i = self.segment(t);
        self.values[i] * math::powf(t / self.ts[i], self.slope(i))
    }

    fn derivative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let i = self.segment(t);
        self.eval(t) * self.slope(i) / t
    }

    fn scaled(&self, factor: f64) -> Table {
        Table { ts: self.ts.clone(), values: self.values.iter().map(|v| v * factor).collect() }
    }
}

/// `t ↦ N G*(t/N)` for a profile `G`. Below `N·q` this is a pure power and
/// up to `N·G'(1+)` it is linear; beyond that `log A` is tabulated against
/// `log t` with exact slopes and evaluated by cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq)]
struct ConjugateFn {
    profile: Profile,
    scale: f64,
    power_end: f64,
    linear_end: f64,
    y0: f64,
    step: f64,
    z: Vec<f64>,
    dz: Vec<f64>,
}

const SPLINE_NODES: usize = 4096;
const SPLINE_DECADES: f64 = 16.0;

impl ConjugateFn {
    fn new(profile: Profile, scale: f64) -> Self {
        let power_end = scale * profile.left_derivative_at_one();
        let linear_end = scale * profile.right_derivative_at_one();
        let y0 = math::ln(linear_end);
        let step = SPLINE_DECADES * core::f64::consts::LN_10 / (SPLINE_NODES - 1) as f64;
        let mut f = ConjugateFn { profile, scale, power_end, linear_end, y0, step, z: Vec::new(), dz: Vec::new() };
        let (z, dz): (Vec<f64>, Vec<f64>) = (0..SPLINE_NODES)
            .map(|i| {
                let t = math::exp(y0 + step * i as f64);
                let a = f.exact(t);
                (math::ln(a), t * f.derivative(t) / a)
            })
            .unzip();
        f.z = z;
        f.dz = dz;
        f
    }

    fn exact(&self, t: f64) -> f64 {
        self.scale * self.profile.conjugate(t / self.scale)
    }

    fn derivative(&self, t: f64) -> f64 {
        self.profile.conjugate_argmax(t / self.scale)
    }

    fn value(&self, t: f64) -> f64 {
        if t <= self.power_end {
            return self.exact(t);
        }
        if t <= self.linear_end {
            return t - self.scale;
        }
        let pos = (math::ln(t) - self.y0) / self.step;
        let i = pos as usize;
        if i + 1 >= SPLINE_NODES {
            return self.exact(t);
        }
        let tau = pos - i as f64;
        let (z0, z1) = (self.z[i], self.z[i + 1]);
        let (m0, m1) = (self.dz[i] * self.step, self.dz[i + 1] * self.step);
        let t2 = tau * tau;
        let t3 = t2 * tau;
        let z = (2.0 * t3 - 3.0 * t2 + 1.0) * z0 + (t3 - 2.0 * t2 + tau) * m0 + (-2.0 * t3 + 3.0 * t2) * z1 + (t3 - t2) * m1;
        math::exp(z)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Power(f64),
    Profile(Profile),
    Conjugate(Arc<ConjugateFn>),
    Table(Table),
}

/// A Young function `A`, normalized so that `A(1) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct YoungFunction {
    family: YoungFamily,
    side: Side,
    p: f64,
    eta: f64,
    normalizer: f64,
    raw_scale: f64,
    repr: Repr,
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid("p", "must be a finite real > 1"));
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(invalid("eta", "must be a finite real >= 0"));
    }
    Ok(())
}

impl YoungFunction {
    /// `A(t) = t^p`. `p = 1` is accepted so that the Orlicz maximal function
    /// can reduce to the Hardy–Littlewood one.
    pub fn power(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid("p", "must be a finite real >= 1"));
        }
        Ok(YoungFunction {
            family: YoungFamily::Power,
            side: Side::Primal,
            p,
            eta: 0.0,
            normalizer: 1.0,
            raw_scale: 1.0,
            repr: Repr::Power(p),
        })
    }

    /// Log bump `L_{p',eta}(t) ≃ t^p (Log t)^{-1-(p-1)eta}`, whose dual is
    /// exactly `t^{p'} (Log t)^{1/(p-1)+eta}`.
    pub fn log_bump(p: f64, eta: f64) -> Result<Self> {
        check_exponent(p)?;
        check_eta(eta)?;
        let dual = Profile::new(conjugate_exponent(p), 1.0 / (p - 1.0) + eta, 0.0, 0.0);
        Ok(Self::from_conjugate(YoungFamily::LogBump, p, eta, dual))
    }

    /// Log-log bump `Λ_{p',eta}(t) ≃ t^p (Log t)^{-1} (Log Log t)^{-1-(p-1)eta}`,
    /// dual to `t^{p'} (Log t)^{1/(p-1)} (Log Log t)^{1/(p-1)+eta}`.
    pub fn loglog_bump(p: f64, eta: f64) -> Result<Self> {
        check_exponent(p)?;
        check_eta(eta)?;
        let a = 1.0 / (p - 1.0);
        let dual = Profile::new(conjugate_exponent(p), a, a + eta, 0.0);
        Ok(Self::from_conjugate(YoungFamily::LogLogBump, p, eta, dual))
    }

    /// Explicit profile as a Young function (primal side).
    pub fn profile(profile: Profile) -> Result<Self> {
        if !(profile.power >= 1.0 && profile.power.is_finite()) {
            return Err(invalid("power", "profile power must be >= 1"));
        }
        Ok(YoungFunction {
            family: YoungFamily::Profile,
            side: Side::Primal,
            p: profile.power,
            eta: 0.0,
            normalizer: 1.0,
            raw_scale: 1.0,
            repr: Repr::Profile(profile),
        })
    }

    /// Tabulated Young function; the table is rescaled so that `A(1) = 1`.
    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self> {
        let table = Table::new(points)?;
        let at_one = table.eval(1.0);
        let table = table.scaled(1.0 / at_one);
        let p = table.slope(table.ts.len() - 2);
        Ok(YoungFunction {
            family: YoungFamily::Tabulated,
            side: Side::Primal,
            p,
            eta: 0.0,
            normalizer: 1.0 / at_one,
            raw_scale: 1.0,
            repr: Repr::Table(table),
        })
    }

    fn from_conjugate(family: YoungFamily, p: f64, eta: f64, profile: Profile) -> Self {
        let scale = conjugate_scale(&profile);
        YoungFunction {
            family,
            side: Side::Primal,
            p,
            eta,
            normalizer: scale,
            raw_scale: 1.0,
            repr: Repr::Conjugate(Arc::new(ConjugateFn::new(profile, scale))),
        }
    }

    /// Builds a descriptor from its serialized parts.
    pub fn from_descriptor(family: YoungFamily, p: f64, eta: f64, side: Side) -> Result<Self> {
        let base = match family {
            YoungFamily::Power => {
                if side == Side::Dual {
                    check_exponent(p)?;
                    return Self::power(conjugate_exponent(p));
                }
                Self::power(p)?
            }
            YoungFamily::LogBump => Self::log_bump(p, eta)?,
            YoungFamily::LogLogBump => Self::loglog_bump(p, eta)?,
            YoungFamily::Profile | YoungFamily::Tabulated => {
                return Err(invalid("family", "needs explicit data, not a (p, eta) descriptor"))
            }
        };
        Ok(match side {
            Side::Primal => base,
            Side::Dual => base.dual()?,
        })
    }

    pub fn family(&self) -> YoungFamily {
        self.family
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// The `B_p` index of the primal bump this descriptor was built from.
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Constant that was used to force `A(1) = 1`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// For a dual, the value at 1 of the raw conjugate before renormalization.
    pub fn raw_scale(&self) -> f64 {
        self.raw_scale
    }

    /// Constant `κ` with `A*(t) ≤ κ Ā(t)`, where `Ā = self.dual()`, so that
    /// `s t ≤ A(s) + max(1, κ) Ā(t)`.
    pub fn duality_constant(&self) -> Result<f64> {
        Ok(self.dual()?.raw_scale.max(1.0))
    }

    pub fn profile_data(&self) -> Option<Profile> {
        match &self.repr {
            Repr::Profile(p) => Some(*p),
            Repr::Conjugate(c) => Some(c.profile),
            _ => None,
        }
    }

    pub fn table(&self) -> Option<&Table> {
        match &self.repr {
            Repr::Table(t) => Some(t),
            _ => None,
        }
    }

    /// `A(t)`; errors on negative `t`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeArgument(t));
        }
        Ok(self.value(t))
    }

    /// `A(t)` for `t ≥ 0` without the domain check.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.repr {
            Repr::Power(p) => {
                if *p == 2.0 {
                    t * t
                } else {
                    math::powf(t, *p)
                }
            }
            Repr::Profile(g) => g.eval(t),
            Repr::Conjugate(c) => c.value(t),
            Repr::Table(tab) => tab.eval(t),
        }
    }

    /// `A'(t)` (right derivative at kinks).
    pub fn derivative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return match &self.repr {
                Repr::Power(p) if *p == 1.0 => 1.0,
                _ => 0.0,
            };
        }
        match &self.repr {
            Repr::Power(p) => p * math::powf(t, p - 1.0),
            Repr::Profile(g) => g.derivative(t),
            Repr::Conjugate(c) => c.derivative(t),
            Repr::Table(tab) => tab.derivative(t),
        }
    }

    /// Leading power `q` with `A(t) = t^q × (slowly varying)` at infinity.
    pub fn exponent(&self) -> f64 {
        self.asymptotics().0
    }

    /// `(q, a, b)` with `A(t) ≈ t^q (Log t)^a (Log Log t)^b` as `t → ∞`.
    fn asymptotics(&self) -> (f64, f64, f64) {
        match &self.repr {
            Repr::Power(p) => (*p, 0.0, 0.0),
            Repr::Profile(g) => (g.power, g.log + g.log_shift, g.loglog),
            Repr::Conjugate(c) => {
                let profile = &c.profile;
                let q = profile.power;
                let k = q - 1.0;
                (q / k, -(profile.log + profile.log_shift) / k, -profile.loglog / k)
            }
            Repr::Table(t) => (t.slope(t.ts.len() - 2), 0.0, 0.0),
        }
    }

    /// Dual Young function `Ā`, renormalized so that `Ā(1) = 1`; the raw
    /// value at 1 is kept in [`raw_scale`](Self::raw_scale).
    pub fn dual(&self) -> Result<YoungFunction> {
        match &self.repr {
            Repr::Power(p) => {
                check_exponent(*p)?;
                let q = conjugate_exponent(*p);
                let mut d = Self::power(q)?;
                d.raw_scale = (p - 1.0) * math::powf(*p, -q);
                Ok(d)
            }
            Repr::Conjugate(c) => Ok(YoungFunction {
                family: self.family,
                side: self.side.flip(),
                p: self.p,
                eta: self.eta,
                normalizer: 1.0,
                raw_scale: c.scale,
                repr: Repr::Profile(c.profile),
            }),
            Repr::Profile(profile) => {
                if profile.power <= 1.0 {
                    return Err(invalid("power", "dual needs a profile power > 1"));
                }
                let scale = conjugate_scale(profile);
                Ok(YoungFunction {
                    family: self.family,
                    side: self.side.flip(),
                    p: self.p,
                    eta: self.eta,
                    normalizer: scale,
                    raw_scale: profile.conjugate(1.0),
                    repr: Repr::Conjugate(Arc::new(ConjugateFn::new(*profile, scale))),
                })
            }
            Repr::Table(_) => numeric_dual(self),
        }
    }

    /// Sampled Young-function audit on a geometric grid.
    pub fn audit(&self) -> YoungAudit {
        let ts: Vec<f64> = (-40..=60).map(|k| math::powf(2.0, k as f64 * 0.5)).collect();
        let vals: Vec<f64> = ts.iter().map(|&t| self.value(t)).collect();
        let nondecreasing = vals.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
        let mut convex = true;
        for i in 1..ts.len() - 1 {
            let (t0, t1, t2) = (ts[i - 1], ts[i], ts[i + 1]);
            let interp = vals[i - 1] + (vals[i + 1] - vals[i - 1]) * (t1 - t0) / (t2 - t0);
            if vals[i] > interp * (1.0 + 1e-9) {
                convex = false;
            }
        }
        let ratios: Vec<f64> = (0..=40)
            .map(|k| {
                let t = math::powf(2.0, k as f64);
                self.value(t) / t
            })
            .collect();
        let superlinear = ratios.windows(2).all(|w| w[1] > w[0]);
        let at_zero = self.value(0.0);
        let at_one = self.value(1.0);
        YoungAudit { at_zero, at_one, nondecreasing, convex, superlinear }
    }
}

/// Result of [`YoungFunction::audit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoungAudit {
    pub at_zero: f64,
    pub at_one: f64,
    pub nondecreasing: bool,
    pub convex: bool,
    pub superlinear: bool,
}

impl YoungAudit {
    pub fn is_young(&self) -> bool {
        self.at_zero == 0.0 && (self.at_one - 1.0).abs() < 1e-9 && self.nondecreasing && self.convex && self.superlinear
    }
}

/// Scale `N` with `N G*(1/N) = 1`, so that `t ↦ N G*(t/N)` equals 1 at 1.
/// `N ↦ N G*(1/N) = sup_s (s - N G(s))` is decreasing.
fn conjugate_scale(profile: &Profile) -> f64 {
    let h = |z: f64| {
        let n = math::exp(z);
        math::ln(n * profile.conjugate(1.0 / n))
    };
    let mut lo = -1.0;
    while h(lo) < 0.0 && lo > -700.0 {
        lo *= 2.0;
    }
    let mut hi = 1.0;
    while h(hi) > 0.0 && hi < 700.0 {
        hi *= 2.0;
    }
    math::exp(math::solve_bracketed(h, lo, hi, 1e-15, 300))
}

/// The literal asymptotic form `t^p (Log t^{p'})^{-1-(p-1)eta}` of the log
/// bump. It is not monotone near `t = 1`, so it only serves as a ratio
/// reference for [`YoungFunction::log_bump`].
pub fn log_bump_reference(p: f64, eta: f64, t: f64) -> f64 {
    let pp = conjugate_exponent(p);
    math::powf(t, p) * math::powf(big_log(math::powf(t, pp)), -1.0 - (p - 1.0) * eta)
}

/// `t^{p'} (Log t)^{1/(p-1)+eta}`: the closed-form dual of the log bump.
pub fn log_bump_dual_reference(p: f64, eta: f64, t: f64) -> f64 {
    math::powf(t, conjugate_exponent(p)) * math::powf(big_log(t), 1.0 / (p - 1.0) + eta)
}

/// `t^{p'} (Log t)^{1/(p-1)} (Log Log t)^{1/(p-1)+eta}`.
pub fn loglog_bump_dual_reference(p: f64, eta: f64, t: f64) -> f64 {
    let a = 1.0 / (p - 1.0);
    math::powf(t, conjugate_exponent(p)) * math::powf(big_log(t), a) * math::powf(big_loglog(t), a + eta)
}

/// Inverse of `A'` at `u`, by bracketing in `log t`.
fn inverse_derivative(a: &YoungFunction, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let target = math::ln(u);
    let h = |y: f64| {
        let d = a.derivative(math::exp(y));
        if d <= 0.0 {
            f64::NEG_INFINITY
        } else {
            math::ln(d) - target
        }
    };
    let mut lo = -1.0;
    while h(lo) > 0.0 && lo > -700.0 {
        lo *= 2.0;
    }
    let mut hi = 1.0;
    while h(hi) < 0.0 && hi < 700.0 {
        hi *= 2.0;
    }
    math::exp(math::solve_bracketed(h, lo, hi, 1e-14, 300))
}

/// Dual `Ā(s) = ∫_0^s (A')^{-1}(u) du` computed by trapezoidal quadrature on
/// [`DUAL_NODES`] log-spaced nodes, returned as a tabulated function with
/// `Ā(1) = 1` and the raw value at 1 kept as `raw_scale`.
pub fn numeric_dual(a: &YoungFunction) -> Result<YoungFunction> {
    let n = DUAL_NODES;
    let lmin = math::ln(DUAL_GRID_MIN);
    let lmax = math::ln(DUAL_GRID_MAX);
    let us: Vec<f64> = (0..n).map(|i| math::exp(lmin + (lmax - lmin) * i as f64 / (n - 1) as f64)).collect();
    let inv: Vec<f64> = us.iter().map(|&u| inverse_derivative(a, u)).collect();
    if inv.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(invalid("A", "derivative could not be inverted on the dual grid"));
    }
    // ∫_0^{u_0} via the local power law of the integrand
    let k = math::ln(inv[1] / inv[0]) / math::ln(us[1] / us[0]);
    let mut acc = us[0] * inv[0] / (1.0 + k);
    let mut points = Vec::with_capacity(n);
    points.push((us[0], acc));
    for i in 1..n {
        acc += 0.5 * (inv[i] + inv[i - 1]) * (us[i] - us[i - 1]);
        points.push((us[i], acc));
    }
    let table = Table::new(&points)?;
    let raw_at_one = table.eval(1.0);
    let table = table.scaled(1.0 / raw_at_one);
    let p = table.slope(n - 2);
    Ok(YoungFunction {
        family: YoungFamily::Tabulated,
        side: a.side.flip(),
        p,
        eta: a.eta,
        normalizer: 1.0 / raw_at_one,
        raw_scale: raw_at_one,
        repr: Repr::Table(table),
    })
}

/// A value with its probability mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub mass: f64,
}

impl Sample {
    pub fn new(value: f64, mass: f64) -> Self {
        Sample { value, mass }
    }
}

/// `inf{λ > 0 : Σ A(v_i / λ) m_i ≤ 1}` for a probability sample list.
pub fn luxembourg_norm(samples: &[Sample], a: &YoungFunction, tol: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut total = 0.0;
    for s in samples {
        if !(s.value >= 0.0 && s.value.is_finite() && s.mass >= 0.0 && s.mass.is_finite()) {
            return Err(Error::InvalidSample);
        }
        total += s.mass;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::MassNotNormalized(total));
    }
    Ok(solve_norm(
        |lambda| samples.iter().map(|s| a.value(s.value / lambda) * s.mass).sum(),
        samples.iter().filter(|s| s.mass > 0.0).map(|s| s.value).fold(0.0, f64::max),
        tol,
    ))
}

/// Luxembourg norm of equally weighted values (masses `1/n`).
pub fn luxembourg_uniform(values: &[f64], a: &YoungFunction, tol: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = 1.0 / values.len() as f64;
    solve_norm(|lambda| values.iter().map(|&v| a.value(v / lambda)).sum::<f64>() * m, values.iter().copied().fold(0.0, f64::max), tol)
}

fn solve_norm<F: Fn(f64) -> f64>(modular: F, vmax: f64, tol: f64) -> f64 {
    if vmax <= 0.0 {
        return 0.0;
    }
    // the modular is ≤ 1 at λ = vmax because A(1) = 1 and the masses sum to 1
    let h = |y: f64| {
        let m = modular(math::exp(y));
        if m <= 0.0 {
            f64::NEG_INFINITY
        } else {
            math::ln(m)
        }
    };
    let hi = math::ln(vmax);
    if h(hi) >= 0.0 {
        return vmax;
    }
    let mut lo = math::ln(vmax * 1e-9);
    let mut step = 20.0;
    while h(lo) < 0.0 {
        lo -= step;
        step *= 2.0;
        if lo < -1400.0 {
            return math::exp(lo);
        }
    }
    math::exp(math::solve_bracketed(h, lo, hi, tol, 200))
}

/// Verdict of the `B_p` tail test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpVerdict {
    Finite,
    Divergent,
    /// Tabulated functions: only the range up to `T_max` was integrated.
    InconclusiveTail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpIntegral {
    /// `∫_1^{T_max} A(t) t^{-p} dt/t`.
    pub value: f64,
    /// Closed-form estimate of `∫_{T_max}^∞` when the tail is finite.
    pub tail_bound: Option<f64>,
    pub verdict: BpVerdict,
}

/// The `B_p` integral `∫^{T_max} A(t) t^{-p} dt/t` (from `t = 1`) together
/// with an analytic classification of the tail.
pub fn bp_integral(a: &YoungFunction, p: f64, t_max: f64) -> Result<BpIntegral> {
    check_exponent(p)?;
    if !(t_max > 1.0 && t_max.is_finite()) {
        return Err(invalid("t_max", "must be a finite real > 1"));
    }
    let umax = math::ln(t_max);
    let integrand = |u: f64| a.value(math::exp(u)) * math::exp(-p * u);
    let value = math::integrate(integrand, 0.0, umax, 1e-10, 64);
    let at_end = integrand(umax);
    if a.family == YoungFamily::Tabulated {
        return Ok(BpIntegral { value, tail_bound: None, verdict: BpVerdict::InconclusiveTail });
    }
    let (q, la, lb) = a.asymptotics();
    let eps = 1e-12;
    let l = 1.0 + umax;
    let (verdict, tail) = if q < p - eps {
        (BpVerdict::Finite, Some(at_end / (p - q)))
    } else if q > p + eps {
        (BpVerdict::Divergent, None)
    } else if la < -1.0 - eps {
        (BpVerdict::Finite, Some(at_end * l / (-la - 1.0)))
    } else if (la + 1.0).abs() <= eps && lb < -1.0 - eps {
        (BpVerdict::Finite, Some(at_end * l * big_log(l) / (-lb - 1.0)))
    } else {
        (BpVerdict::Divergent, None)
    };
    Ok(BpIntegral { value, tail_bound: tail, verdict })
}

/// Both sides of the generalized Hölder inequality on a probability space:
/// `lhs = Σ f_i g_i m_i`, `rhs = ‖f‖_A ‖g‖_Ā`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderPair {
    pub lhs: f64,
    pub rhs: f64,
}

pub fn holder_pair(f: &[f64], g: &[f64], masses: &[f64], a: &YoungFunction, tol: f64) -> Result<HolderPair> {
    if f.len() != masses.len() || g.len() != masses.len() {
        return Err(Error::LengthMismatch { expected: masses.len(), got: f.len().min(g.len()) });
    }
    let fs: Vec<Sample> = f.iter().zip(masses).map(|(&v, &m)| Sample::new(v, m)).collect();
    let gs: Vec<Sample> = g.iter().zip(masses).map(|(&v, &m)| Sample::new(v, m)).collect();
    let dual = a.dual()?;
    let lhs = f.iter().zip(g).zip(masses).map(|((x, y), m)| x * y * m).sum();
    let rhs = luxembourg_norm(&fs, a, tol)? * luxembourg_norm(&gs, &dual, tol)?;
    Ok(HolderPair { lhs, rhs })
}
