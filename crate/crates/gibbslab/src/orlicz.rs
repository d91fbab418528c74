//! Young-function calculus.
//!
//! A Young function is convex, even, vanishes at the origin and grows to
//! infinity. The crate works with two representations: closed-form powers
//! `|x|^p / p` and tabulated values on a log-spaced grid. On top of these the
//! module builds
//!
//! * Legendre conjugates `phi*(y) = sup_x { x|y| - phi(x) }`,
//! * the quadratic modification `H(x) = x^2` for `|x| <= 1`,
//!   `phi(|x|)/phi(1)` for `|x| >= 1`,
//! * the growth envelope `omega(x) = sup_t H(tx)/H(t)` together with its
//!   conjugate, and
//! * the integral inequality `lambda * int_0^lambda omega(u/2)/u^2 du
//!   <= omega(lambda/2)` used by Herbst-style tail arguments.
//!
//! Tabulated objects all live on the shared log grid below; tolerances in the
//! tests are expressed in multiples of the local grid spacing.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest abscissa of the shared log grid.
pub const GRID_MIN: f64 = 1e-6;
/// Largest abscissa of the shared log grid.
pub const GRID_MAX: f64 = 1e6;
/// Number of points of the shared log grid.
pub const GRID_POINTS: usize = 4096;

/// Log-spaced grid on `[lo, hi]` with `n` points, endpoints included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// The shared default grid, built once per process.
pub fn default_grid() -> &'static [f64] {
    static GRID: OnceLock<Vec<f64>> = OnceLock::new();
    GRID.get_or_init(|| log_grid(GRID_MIN, GRID_MAX, GRID_POINTS))
}

/// A Young function. `Power { p }` is `|x|^p / p`; `Tabulated` carries values
/// on an increasing positive grid and interpolates linearly (chords of a
/// convex function, so interpolation never undershoots).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum YoungFunction {
    Power { p: f64 },
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

impl YoungFunction {
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "power exponent must satisfy p > 1, got {p}"
            )));
        }
        Ok(YoungFunction::Power { p })
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidParameter(
                "tabulated Young function needs matching grids of length >= 2".into(),
            ));
        }
        if grid[0] <= 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "tabulated grid must be strictly increasing and positive".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "tabulated values must be finite and nonnegative".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "tabulated values must be nondecreasing".into(),
            ));
        }
        Ok(YoungFunction::Tabulated { grid, values })
    }

    /// Sample a closed-form function onto the default grid.
    pub fn tabulate(f: impl Fn(f64) -> f64) -> Self {
        let grid = default_grid().to_vec();
        let values = grid.iter().map(|&x| f(x)).collect();
        YoungFunction::Tabulated { grid, values }
    }

    /// Even evaluation. Tabulated functions interpolate linearly, join the
    /// origin below the first node and extend the last chord above the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        match self {
            YoungFunction::Power { p } => x.powf(*p) / p,
            YoungFunction::Tabulated { grid, values } => interp_from_origin(grid, values, x),
        }
    }

    /// First discrete slope violation of convexity, if any.
    pub fn convexity_violation(&self) -> Option<usize> {
        match self {
            YoungFunction::Power { .. } => None,
            YoungFunction::Tabulated { grid, values } => {
                let mut prev = values[0] / grid[0]; // chord from the origin
                for i in 0..grid.len() - 1 {
                    let s = (values[i + 1] - values[i]) / (grid[i + 1] - grid[i]);
                    if s < prev * (1.0 - 1e-12) - 1e-300 {
                        return Some(i + 1);
                    }
                    prev = s;
                }
                None
            }
        }
    }

    /// Derivative at 1, used for the touching point of Young's inequality.
    pub fn slope_at_one(&self) -> f64 {
        match self {
            YoungFunction::Power { .. } => 1.0,
            YoungFunction::Tabulated { .. } => {
                let h = 1e-5;
                (self.eval(1.0 + h) - self.eval(1.0 - h)) / (2.0 * h)
            }
        }
    }

    /// Checks the three clauses that make a Young function usable for the
    /// quadratic modification: superlinear growth, vanishing only at zero and
    /// zero slope at the origin. Tabulated inputs are checked at grid level.
    pub fn check_nice(&self) -> Result<()> {
        match self {
            YoungFunction::Power { .. } => Ok(()), // p > 1 enforced at construction
            YoungFunction::Tabulated { grid, values } => {
                if values.iter().any(|&v| v <= 0.0) {
                    return Err(Error::NotNice {
                        clause: "vanishes only at zero (a positive grid point maps to 0)".into(),
                    });
                }
                if values[0] / grid[0] > 1e-3 {
                    return Err(Error::NotNice {
                        clause: format!(
                            "zero slope at the origin (first chord slope {:.3e})",
                            values[0] / grid[0]
                        ),
                    });
                }
                let n = grid.len();
                let mid = n / 2;
                let r_mid = values[mid] / grid[mid];
                let r_end = values[n - 1] / grid[n - 1];
                if r_end < 2.0 * r_mid {
                    return Err(Error::NotNice {
                        clause: "superlinear growth (phi(x)/x fails to double across the grid)"
                            .into(),
                    });
                }
                Ok(())
            }
        }
    }
}

fn interp_from_origin(grid: &[f64], values: &[f64], x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x <= grid[0] {
        return values[0] * x / grid[0];
    }
    let n = grid.len();
    if x >= grid[n - 1] {
        let s = (values[n - 1] - values[n - 2]) / (grid[n - 1] - grid[n - 2]);
        return values[n - 1] + s * (x - grid[n - 1]);
    }
    let i = match grid.binary_search_by(|g| g.total_cmp(&x)) {
        Ok(i) => return values[i],
        Err(i) => i, // grid[i-1] < x < grid[i]
    };
    let t = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
    values[i - 1] + t * (values[i] - values[i - 1])
}

/// Discrete Legendre transform of `(xs, vs)` evaluated on increasing `ys`,
/// with the origin included as a virtual grid point. The maximizing index is
/// nondecreasing in `y` for convex data, so a single forward pointer covers
/// the whole output grid.
fn discrete_legendre(xs: &[f64], vs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut best = 0usize;
    let score = |i: usize, y: f64| xs[i] * y - vs[i];
    ys.iter()
        .map(|&y| {
            while best + 1 < n && score(best + 1, y) >= score(best, y) {
                best += 1;
            }
            // allow the pointer to retreat once in case the previous y
            // overshot on a flat stretch
            while best > 0 && score(best - 1, y) > score(best, y) {
                best -= 1;
            }
            score(best, y).max(0.0) // x = 0 contributes xy - phi = 0
        })
        .collect()
}

/// Legendre conjugate. Powers conjugate in closed form,
/// `(|x|^p/p)* = |y|^q/q` with `1/p + 1/q = 1`; tabulated functions go
/// through the discrete transform on their own grid and must be convex.
pub fn conjugate(phi: &YoungFunction) -> Result<YoungFunction> {
    match phi {
        YoungFunction::Power { p } => YoungFunction::power(p / (p - 1.0)),
        YoungFunction::Tabulated { grid, values } => {
            if let Some(index) = phi.convexity_violation() {
                return Err(Error::NotConvex { index });
            }
            let vals = discrete_legendre(grid, values, grid);
            YoungFunction::tabulated(grid.clone(), vals)
        }
    }
}

/// Quadratic modification of a Young function: `x^2` inside the unit
/// interval, `phi(|x|)/phi(1)` outside. Continuous at 1 with `H(1) = 1`.
#[derive(Clone, Debug)]
pub struct HFunction {
    base: YoungFunction,
    phi_one: f64,
}

/// Builds the modification, rejecting inputs that fail a niceness clause.
pub fn modification(phi: &YoungFunction) -> Result<HFunction> {
    phi.check_nice()?;
    let phi_one = phi.eval(1.0);
    if !(phi_one > 0.0) {
        return Err(Error::NotNice {
            clause: "vanishes only at zero (phi(1) = 0)".into(),
        });
    }
    Ok(HFunction {
        base: phi.clone(),
        phi_one,
    })
}

impl HFunction {
    pub fn base(&self) -> &YoungFunction {
        &self.base
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        if x <= 1.0 {
            x * x
        } else {
            self.base.eval(x) / self.phi_one
        }
    }

    /// Fresh supremum `sup_t H(tx)/H(t)` over the default t-grid augmented
    /// with the branch points 1 and 1/x.
    pub fn omega(&self, x: f64) -> f64 {
        OmegaEval::new(self).at(x)
    }

    pub fn envelope(&self) -> Result<GrowthEnvelope> {
        GrowthEnvelope::of_h(self)
    }
}

/// One sweep of the ratio supremum with the denominator values cached.
struct OmegaEval<'a> {
    h: &'a HFunction,
    ts: &'static [f64],
    h_of_ts: Vec<f64>,
}

impl<'a> OmegaEval<'a> {
    fn new(h: &'a HFunction) -> Self {
        let ts = default_grid();
        let h_of_ts = ts.iter().map(|&t| h.eval(t)).collect();
        OmegaEval { h, ts, h_of_ts }
    }

    /// Returns infinity when the ratio keeps growing at a grid end, which
    /// signals a genuinely divergent supremum rather than a grid artifact.
    fn at(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let x = x.abs();
        let mut max_all = f64::NEG_INFINITY;
        let mut max_inner = f64::NEG_INFINITY;
        let last = self.ts.len() - 1;
        for (i, (&t, &ht)) in self.ts.iter().zip(&self.h_of_ts).enumerate() {
            let r = self.h.eval(t * x) / ht;
            if r > max_all {
                max_all = r;
            }
            if i != 0 && i != last && r > max_inner {
                max_inner = r;
            }
        }
        for t in [1.0, 1.0 / x] {
            let r = self.h.eval(t * x) / self.h.eval(t);
            if r > max_all {
                max_all = r;
            }
            if r > max_inner {
                max_inner = r;
            }
        }
        if max_all > max_inner * (1.0 + 1e-6) {
            return f64::INFINITY;
        }
        max_all
    }
}

/// Tabulated growth envelope of a positive function together with the
/// Legendre conjugate of the table.
#[derive(Clone, Debug)]
pub struct GrowthEnvelope {
    xs: Vec<f64>,
    omega: Vec<f64>,
    omega_star: Vec<f64>,
}

impl GrowthEnvelope {
    pub fn of_h(h: &HFunction) -> Result<Self> {
        let ev = OmegaEval::new(h);
        Self::build(|x| ev.at(x))
    }

    /// Envelope of an arbitrary positive increasing function, e.g. a
    /// conjugate Young function.
    pub fn of_fn(f: impl Fn(f64) -> f64) -> Result<Self> {
        let ts = default_grid();
        let f_of_ts: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
        let sup = |x: f64| -> f64 {
            let mut max_all = f64::NEG_INFINITY;
            let mut max_inner = f64::NEG_INFINITY;
            let last = ts.len() - 1;
            for (i, (&t, &ft)) in ts.iter().zip(&f_of_ts).enumerate() {
                let r = f(t * x) / ft;
                if r > max_all {
                    max_all = r;
                }
                if i != 0 && i != last && r > max_inner {
                    max_inner = r;
                }
            }
            for t in [1.0, 1.0 / x] {
                let r = f(t * x) / f(t);
                if r > max_all {
                    max_all = r;
                }
                if r > max_inner {
                    max_inner = r;
                }
            }
            if max_all > max_inner * (1.0 + 1e-6) {
                f64::INFINITY
            } else {
                max_all
            }
        };
        Self::build(sup)
    }

    fn build(sup: impl Fn(f64) -> f64) -> Result<Self> {
        let xs = default_grid().to_vec();
        let mut omega = Vec::with_capacity(xs.len());
        for &x in &xs {
            let w = sup(x);
            if !w.is_finite() {
                return Err(Error::DivergentEnvelope { x });
            }
            omega.push(w);
        }
        let omega_star = discrete_legendre(&xs, &omega, &xs);
        Ok(GrowthEnvelope {
            xs,
            omega,
            omega_star,
        })
    }

    /// Envelope value. Below the first node the quadratic profile is used:
    /// omega(x)/x^2 is nondecreasing whenever H dominates its own quadratic
    /// chord, so the first table entry pins the small-x coefficient.
    pub fn omega_at(&self, x: f64) -> f64 {
        let x = x.abs();
        if x == 0.0 {
            return 0.0;
        }
        if x < self.xs[0] {
            return self.omega[0] * (x / self.xs[0]).powi(2);
        }
        interp_from_origin(&self.xs, &self.omega, x)
    }

    pub fn omega_star_at(&self, y: f64) -> f64 {
        interp_from_origin(&self.xs, &self.omega_star, y.abs())
    }

    /// Smallest tabulated x with omega(x) >= y, linearly interpolated.
    pub fn omega_inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y <= self.omega[0] {
            // quadratic continuation below the table
            return self.xs[0] * (y / self.omega[0]).sqrt();
        }
        let n = self.xs.len();
        if y >= self.omega[n - 1] {
            return self.xs[n - 1];
        }
        let i = self.omega.partition_point(|&w| w < y);
        let (w0, w1) = (self.omega[i - 1], self.omega[i]);
        let t = if w1 > w0 { (y - w0) / (w1 - w0) } else { 0.0 };
        self.xs[i - 1] + t * (self.xs[i] - self.xs[i - 1])
    }
}

/// Result of the integral inequality check
/// `lambda * int_0^lambda omega(u/2)/u^2 du <= omega(lambda/2)`.
#[derive(Clone, Copy, Debug)]
pub struct HerbstCheck {
    pub value: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Evaluates the integral with composite Simpson panels, splitting at the
/// branch point u = 2 where the modification switches formula. The integrand
/// extends continuously to u = 0 because omega vanishes quadratically there.
pub fn herbst_integral(h: &HFunction, lambda: f64) -> Result<HerbstCheck> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "herbst integral needs lambda > 0, got {lambda}"
        )));
    }
    let ev = OmegaEval::new(h);
    let x0 = GRID_MIN;
    let (c0, c1) = (ev.at(x0) / (x0 * x0), ev.at(2.0 * x0) / (4.0 * x0 * x0));
    if c0 > 2.0 * c1 {
        return Err(Error::DivergentIntegrand);
    }
    let integrand = |u: f64| -> f64 {
        if u == 0.0 {
            c1 / 4.0
        } else {
            ev.at(u / 2.0) / (u * u)
        }
    };
    let simpson = |a: f64, b: f64, panels: usize| -> f64 {
        let h_step = (b - a) / panels as f64;
        let mut acc = integrand(a) + integrand(b);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * integrand(a + h_step * i as f64);
        }
        acc * h_step / 3.0
    };
    let value = if lambda <= 2.0 {
        lambda * simpson(0.0, lambda, 128)
    } else {
        lambda * (simpson(0.0, 2.0, 128) + simpson(2.0, lambda, 128))
    };
    let bound = ev.at(lambda / 2.0);
    Ok(HerbstCheck {
        value,
        bound,
        ok: value <= bound * (1.0 + 1e-6),
    })
}

/// Verdict of the two-part growth condition: `H/x^2` nondecreasing, and some
/// `t in (2, 8]` with `H/x^t` nonincreasing on the grid.
#[derive(Clone, Debug)]
pub struct H2Report {
    pub ok: bool,
    /// Smallest passing exponent on a 1/16-step grid. The passing set is
    /// upward closed, and the smallest witness yields the weakest (hence
    /// safest) downstream tail envelope.
    pub t_witness: Option<f64>,
    pub first_violation: Option<String>,
}

pub fn check_h2(h: &HFunction) -> H2Report {
    let xs = default_grid();
    let logs: Vec<(f64, f64)> = xs.iter().map(|&x| (x.ln(), h.eval(x).ln())).collect();
    // clause 1: log H - 2 log x nondecreasing
    let mut first_violation = None;
    for w in logs.windows(2) {
        let (lx0, lh0) = w[0];
        let (lx1, lh1) = w[1];
        if (lh1 - 2.0 * lx1) < (lh0 - 2.0 * lx0) - 1e-9 {
            first_violation = Some(format!(
                "H(x)/x^2 decreases near x = {:.6e}",
                lx1.exp()
            ));
            break;
        }
    }
    // clause 2: scan t upward, report the smallest nonincreasing exponent
    let mut t_witness = None;
    'scan: for k in 1..=96u32 {
        let t = 2.0 + k as f64 / 16.0;
        for w in logs.windows(2) {
            let (lx0, lh0) = w[0];
            let (lx1, lh1) = w[1];
            if (lh1 - t * lx1) > (lh0 - t * lx0) + 1e-9 {
                continue 'scan;
            }
        }
        t_witness = Some(t);
        break;
    }
    if t_witness.is_none() && first_violation.is_none() {
        first_violation = Some("no t in (2, 8] makes H/x^t nonincreasing".into());
    }
    H2Report {
        ok: first_violation.is_none() && t_witness.is_some(),
        t_witness,
        first_violation,
    }
}

/// Report of the conjugate-monotonicity and scaling checks around Young's
/// inequality.
#[derive(Clone, Debug)]
pub struct YoungLemmaReport {
    /// Whether `phi/x^a` is nondecreasing on the grid (premise of the rest).
    pub premise_holds: bool,
    /// `phi*/x^{a*}` nonincreasing on the grid, when the premise holds.
    pub conjugate_monotone: Option<bool>,
    /// `phi(tx) <= t^a phi(x)` on random `t in (0,1]`, when the premise holds.
    pub scaling_ok: Option<bool>,
    /// Smallest slack of `phi(x) + phi*(y) - xy` over the random pairs.
    pub young_min_slack: f64,
    /// Slack at the touching point `(1, phi'(1))`.
    pub touch_slack: f64,
}

pub fn check_young_lemmas(
    phi: &YoungFunction,
    a: f64,
    samples: usize,
    seed: u64,
) -> Result<YoungLemmaReport> {
    if !(a > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "conjugate-exponent checks need a > 1, got {a}"
        )));
    }
    let conj = conjugate(phi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| -> f64 {
        (rng.gen_range(lo.ln()..hi.ln())).exp()
    };
    let mut young_min_slack = f64::INFINITY;
    for _ in 0..samples {
        let x = draw(1e-2, 1e2, &mut rng);
        let y = draw(1e-2, 1e2, &mut rng);
        let slack = phi.eval(x) + conj.eval(y) - x * y;
        if slack < young_min_slack {
            young_min_slack = slack;
        }
    }
    let y_touch = phi.slope_at_one();
    let touch_slack = phi.eval(1.0) + conj.eval(y_touch) - y_touch;

    let xs = default_grid();
    let ratio = |f: &YoungFunction, x: f64, e: f64| f.eval(x).ln() - e * x.ln();
    let premise_holds = xs
        .windows(2)
        .all(|w| ratio(phi, w[1], a) >= ratio(phi, w[0], a) - 1e-9);
    let (conjugate_monotone, scaling_ok) = if premise_holds {
        let a_star = a / (a - 1.0);
        let mono = xs
            .windows(2)
            .all(|w| ratio(&conj, w[1], a_star) <= ratio(&conj, w[0], a_star) + 1e-9);
        let mut scaling = true;
        for _ in 0..samples {
            let x = draw(1e-2, 1e2, &mut rng);
            let t = rng.gen_range(0.0f64..1.0).max(1e-6);
            if phi.eval(t * x) > t.powf(a) * phi.eval(x) * (1.0 + 1e-9) + 1e-12 {
                scaling = false;
                break;
            }
        }
        (Some(mono), Some(scaling))
    } else {
        (None, None)
    };
    Ok(YoungLemmaReport {
        premise_holds,
        conjugate_monotone,
        scaling_ok,
        young_min_slack,
        touch_slack,
    })
}
