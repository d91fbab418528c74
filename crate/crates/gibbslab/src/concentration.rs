//! Tail envelopes with their validity regions, empirical exceedance
//! estimates with exact binomial upper bounds, and set-enlargement
//! probabilities measured against the exponential bounds.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::Grid1d;
use crate::model::{Boundary, SpinModel};
use crate::orlicz::{GrowthEnvelope, HFunction, YoungFunction};
use crate::sampler::BlockGibbs;

/// Tail envelope parameters and the validity machinery around them.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub a: f64,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub t_star: f64,
    growth: GrowthEnvelope,
}

#[derive(Clone, Copy, Debug)]
pub struct EnvelopeValue {
    pub value: f64,
    pub valid: bool,
}

impl Envelope {
    pub fn new(a: f64, c: f64, c1: f64, c2: f64, t_star: f64, h: &HFunction) -> Result<Self> {
        for (name, v) in [("a", a), ("c", c), ("C1", c1), ("C2", c2)] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "envelope parameter {name} must be positive, got {v}"
                )));
            }
        }
        if !(t_star > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "the conjugate exponent must exceed 1, got {t_star}"
            )));
        }
        Ok(Envelope {
            a,
            c,
            c1,
            c2,
            t_star,
            growth: h.envelope()?,
        })
    }

    pub fn growth(&self) -> &GrowthEnvelope {
        &self.growth
    }

    pub fn c_ddot(&self) -> f64 {
        1.0 / (2f64.powf(2.0 * self.t_star) * self.c1.powf(self.t_star - 1.0))
    }

    /// Every k up to 64 must satisfy base^k >= k + 1 for the summed decay
    /// to close; k = 1 is the binding case.
    pub fn k_condition_holds(&self) -> bool {
        let base = 1.0 / (2f64.powf(self.t_star) * self.c2.powf(self.t_star - 1.0));
        (1..=64u32).all(|k| base.powi(k as i32) >= (k + 1) as f64)
    }

    fn exponent(&self, r: f64) -> f64 {
        let ac = self.a * self.c;
        ac * self.c_ddot() * self.growth.omega_star_at(2.0 * r / ac)
    }

    /// Smallest radius where the exponent clears 8 ln 2; infinite when the
    /// envelope never gets there.
    pub fn r_min(&self) -> f64 {
        let target = 8.0 * (2.0f64).ln();
        if self.exponent(0.0) >= target {
            return 0.0;
        }
        let mut hi = 1e-6;
        while self.exponent(hi) < target {
            hi *= 2.0;
            if hi > 1e12 {
                return f64::INFINITY;
            }
        }
        let mut lo = hi / 2.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.exponent(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn value(&self, r: f64) -> EnvelopeValue {
        let exponent = self.exponent(r);
        EnvelopeValue {
            value: (-0.5 * exponent).exp(),
            valid: exponent >= 8.0 * (2.0f64).ln() && self.k_condition_holds(),
        }
    }

    /// The proof-chain radius threshold, emitted for audit; validity uses
    /// the 8 ln 2 exponent criterion instead.
    pub fn r_audit(&self) -> f64 {
        let w2 = self.growth.omega_at(2.0);
        let denom = w2 * self.c_ddot() * self.growth.omega_star_at(2.0 / (w2 * self.c));
        16.0 * (2.0f64).ln() / denom
    }

    /// Enlargement decay rate from the same proof chain.
    pub fn k_hat(&self) -> f64 {
        let w2 = self.growth.omega_at(2.0);
        0.5 * w2 * self.c_ddot() * self.growth.omega_star_at(1.0 / (w2 * self.c))
    }
}

/// `exp(-k_f * omega*(2 r / k_f))`.
pub fn herbst_tail(growth: &GrowthEnvelope, k_f: f64, r: f64) -> Result<f64> {
    if !(k_f > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "the tail rate must be positive, got {k_f}"
        )));
    }
    Ok((-k_f * growth.omega_star_at(2.0 * r / k_f)).exp())
}

/// One-sided binomial upper confidence bound.
pub fn clopper_pearson_upper(k: usize, n: usize, confidence: f64) -> f64 {
    use statrs::distribution::{Beta, ContinuousCDF};
    if k >= n {
        return 1.0;
    }
    let b = Beta::new((k + 1) as f64, (n - k) as f64).expect("valid beta shape");
    b.inverse_cdf(confidence)
}

#[derive(Clone, Debug)]
pub struct TailRow {
    pub r: f64,
    pub exceedances: usize,
    pub empirical: f64,
    pub upper_ci: f64,
}

#[derive(Clone, Debug)]
pub struct TailReport {
    /// Location estimate from the first half of the run.
    pub mu_f: f64,
    pub rows: Vec<TailRow>,
    pub tail_samples: usize,
}

/// Exceedance probabilities of F - mu(F) on a radius grid. The location is
/// estimated on the first half of the run and the exceedances counted on
/// the second, so the counts are binomial around the fixed estimate.
#[allow(clippy::too_many_arguments)]
pub fn empirical_tail(
    model: &SpinModel,
    box_radius: u32,
    boundary: &Boundary,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    r_grid: &[f64],
    grid: Grid1d,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> Result<TailReport> {
    if samples < 10_000 {
        return Err(Error::InvalidParameter(format!(
            "tail estimation needs at least 10000 samples, got {samples}"
        )));
    }
    let mut sampler = BlockGibbs::new(model, box_radius, boundary, grid, seed)?;
    let mut values = Vec::with_capacity(samples);
    sampler.run(burn_in, samples, |state| values.push(f(state)));
    let half = values.len() / 2;
    let mu_f = values[..half].iter().sum::<f64>() / half as f64;
    let tail = &values[half..];
    let rows = r_grid
        .iter()
        .map(|&r| {
            let exceedances = tail.iter().filter(|&&v| v - mu_f >= r).count();
            TailRow {
                r,
                exceedances,
                empirical: exceedances as f64 / tail.len() as f64,
                upper_ci: clopper_pearson_upper(exceedances, tail.len(), 0.99),
            }
        })
        .collect();
    Ok(TailReport {
        mu_f,
        rows,
        tail_samples: tail.len(),
    })
}

#[derive(Clone, Debug)]
pub struct DominanceRow {
    pub r: f64,
    pub upper_ci: f64,
    pub envelope: f64,
    pub valid: bool,
    pub dominated: bool,
}

#[derive(Clone, Debug)]
pub struct DominanceReport {
    pub rows: Vec<DominanceRow>,
    /// Every valid radius has its upper confidence bound under the envelope.
    pub all_valid_pass: bool,
    /// No valid radius with an envelope at or below one half: the check
    /// cannot fail and says nothing.
    pub vacuous: bool,
    pub r_min: f64,
    pub r_audit: f64,
    pub k_hat: f64,
}

pub fn dominance_check(tail: &TailReport, env: &Envelope) -> DominanceReport {
    let rows: Vec<DominanceRow> = tail
        .rows
        .iter()
        .map(|row| {
            let ev = env.value(row.r);
            DominanceRow {
                r: row.r,
                upper_ci: row.upper_ci,
                envelope: ev.value,
                valid: ev.valid,
                dominated: !ev.valid || row.upper_ci <= ev.value,
            }
        })
        .collect();
    let all_valid_pass = rows.iter().filter(|r| r.valid).all(|r| r.dominated);
    let vacuous = !rows.iter().any(|r| r.valid && r.envelope <= 0.5);
    DominanceReport {
        rows,
        all_valid_pass,
        vacuous,
        r_min: env.r_min(),
        r_audit: env.r_audit(),
        k_hat: env.k_hat(),
    }
}

/// Coordinate gauge used for set enlargement.
#[derive(Clone, Debug)]
pub enum Gauge {
    /// A Young function applied to |t|, typically the conjugate of the
    /// modified cost.
    Young(YoungFunction),
    /// |t|^(4/3).
    PowerFourThirds,
}

impl Gauge {
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        match self {
            Gauge::Young(phi) => {
                if t == 0.0 {
                    0.0
                } else {
                    phi.eval(t)
                }
            }
            Gauge::PowerFourThirds => t.powf(4.0 / 3.0),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnlargementRow {
    pub r: f64,
    /// Fraction of evaluation points the enlarged set misses; an
    /// over-estimate, because distances are taken to a witness subsample.
    pub complement: f64,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct EnlargementReport {
    pub median: f64,
    pub mu_a: f64,
    pub witnesses: usize,
    pub rows: Vec<EnlargementRow>,
}

/// Probability of missing {F <= median} enlarged by a gauge ball of radius
/// r, against exp(-k_hat r). Witnesses come from the first half of the run,
/// evaluation points from the second.
#[allow(clippy::too_many_arguments)]
pub fn enlargement_probability(
    model: &SpinModel,
    box_radius: u32,
    boundary: &Boundary,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    gauge: &Gauge,
    k_hat: f64,
    r_grid: &[f64],
    grid: Grid1d,
    burn_in: usize,
    samples: usize,
    witness_cap: usize,
    seed: u64,
) -> Result<EnlargementReport> {
    let mut sampler = BlockGibbs::new(model, box_radius, boundary, grid, seed)?;
    let mut configs: Vec<Vec<f64>> = Vec::with_capacity(samples);
    sampler.run(burn_in, samples, |state| configs.push(state.to_vec()));
    let half = configs.len() / 2;

    // empirical median of F on the first half defines the base set
    let mut first: Vec<f64> = configs[..half].iter().map(|c| f(c)).collect();
    first.sort_by(|a, b| a.total_cmp(b));
    let median = first[first.len() / 2];

    let witnesses: Vec<&Vec<f64>> = configs[..half]
        .iter()
        .filter(|c| f(c) <= median)
        .take(witness_cap)
        .collect();
    if witnesses.is_empty() {
        return Err(Error::InvalidParameter(
            "the witness set for the base set is empty".into(),
        ));
    }
    let mu_a = witnesses.len() as f64 / half as f64;
    let precision = 2.0 * 0.5 / (half as f64).sqrt();
    if mu_a < 0.5 - precision {
        return Err(Error::InvalidParameter(format!(
            "base set mass {mu_a:.4} fell below one half"
        )));
    }

    let eval = &configs[half..];
    let dists: Vec<f64> = eval
        .par_iter()
        .map(|x| {
            // points already in the base set sit at distance zero
            if f(x) <= median {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for z in &witnesses {
                let mut acc = 0.0;
                for (xi, zi) in x.iter().zip(z.iter()) {
                    acc += gauge.eval(xi - zi);
                    if acc >= best {
                        break;
                    }
                }
                best = best.min(acc);
            }
            best
        })
        .collect();

    let rows = r_grid
        .iter()
        .map(|&r| {
            let missed = dists.iter().filter(|&&d| d >= r).count();
            EnlargementRow {
                r,
                complement: missed as f64 / dists.len() as f64,
                bound: (-k_hat * r).exp(),
            }
        })
        .collect();
    Ok(EnlargementReport {
        median,
        mu_a,
        witnesses: witnesses.len(),
        rows,
    })
}

#[derive(Clone, Debug)]
pub struct TalagrandRow {
    pub r: f64,
    /// Lower bound on the mass of the two-ball enlargement.
    pub member_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct TalagrandReport {
    pub median: f64,
    pub rows: Vec<TalagrandRow>,
}

/// Mass of A + sqrt(r) B_2 + s(r) B_conj, where s(r) inverts the growth
/// envelope of the conjugate at 1/r. Membership is decided per witness by
/// splitting the difference vector at every sorted cut: the small block
/// must fit the Euclidean ball, the rest the scaled conjugate ball. The
/// split only under-reports membership.
#[allow(clippy::too_many_arguments)]
pub fn talagrand_check(
    model: &SpinModel,
    box_radius: u32,
    boundary: &Boundary,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    conjugate: &YoungFunction,
    r_grid: &[f64],
    grid: Grid1d,
    burn_in: usize,
    samples: usize,
    witness_cap: usize,
    seed: u64,
) -> Result<TalagrandReport> {
    let mut sampler = BlockGibbs::new(model, box_radius, boundary, grid, seed)?;
    let mut configs: Vec<Vec<f64>> = Vec::with_capacity(samples);
    sampler.run(burn_in, samples, |state| configs.push(state.to_vec()));
    let half = configs.len() / 2;
    let mut first: Vec<f64> = configs[..half].iter().map(|c| f(c)).collect();
    first.sort_by(|a, b| a.total_cmp(b));
    let median = first[first.len() / 2];
    let witnesses: Vec<&Vec<f64>> = configs[..half]
        .iter()
        .filter(|c| f(c) <= median)
        .take(witness_cap)
        .collect();
    if witnesses.is_empty() {
        return Err(Error::InvalidParameter(
            "the witness set for the base set is empty".into(),
        ));
    }

    let growth = GrowthEnvelope::of_fn(|x| conjugate.eval(x))?;
    let eval = &configs[half..];
    let rows: Vec<TalagrandRow> = r_grid
        .iter()
        .map(|&r| {
            let scale = if r > 0.0 {
                1.0 / growth.omega_inverse(1.0 / r)
            } else {
                0.0
            };
            let members = eval
                .par_iter()
                .filter(|x| {
                    if f(x) <= median {
                        return true;
                    }
                    witnesses.iter().any(|z| {
                        let mut dif: Vec<f64> =
                            x.iter().zip(z.iter()).map(|(a, b)| (a - b).abs()).collect();
                        dif.sort_by(|a, b| a.total_cmp(b));
                        // cut: coordinates below go to the Euclidean ball,
                        // the rest to the scaled conjugate ball; prefix and
                        // suffix sums make every cut O(1)
                        let k = dif.len();
                        let mut prefix_sq = vec![0.0; k + 1];
                        for i in 0..k {
                            prefix_sq[i + 1] = prefix_sq[i] + dif[i] * dif[i];
                        }
                        let mut suffix_conj = vec![0.0; k + 1];
                        if scale > 0.0 {
                            for i in (0..k).rev() {
                                suffix_conj[i] = suffix_conj[i + 1] + conjugate.eval(dif[i] / scale);
                            }
                        }
                        (0..=k).any(|cut| {
                            prefix_sq[cut] <= r
                                && (cut == k || (scale > 0.0 && suffix_conj[cut] <= 1.0))
                        })
                    })
                })
                .count();
            TalagrandRow {
                r,
                member_fraction: members as f64 / eval.len() as f64,
            }
        })
        .collect();
    Ok(TalagrandReport { median, rows })
}
