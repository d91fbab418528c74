//! The small-coupling perturbation pipeline: an exponential-moment penalty
//! per site, its square-moment bound under the box measure, and the
//! penalty-shifted log-Sobolev check.

use crate::error::{Error, Result};
use crate::functionals::{scan_probes, RatioKind};
use crate::lattice::{neighbors, Site};
use crate::measure::{Grid1d, OneSiteMeasure, TAIL_RTOL};
use crate::model::{Boundary, SpinModel};
use crate::sampler::{batch_means, BlockGibbs, McEstimate};

/// Interaction load at spin value `x` with the given neighbour values:
/// twice `c` times the summed squared potential gradients plus the summed
/// potential over the inverse coupling bound.
pub fn interaction_load(model: &SpinModel, x: f64, neighbor_values: &[f64], c: f64) -> f64 {
    let mut grad_sq = 0.0;
    let mut pot = 0.0;
    for &z in neighbor_values {
        let g = model.potential.dx(x, z);
        grad_sq += g * g;
        pot += model.potential.eval(x, z);
    }
    2.0 * c * grad_sq + pot / model.j0
}

/// `c_hat * log E e^{epsilon * load}` under the one-site conditional law.
/// Errors when the tilted integrand is not tail-contained on the grid,
/// which signals that epsilon is too large.
pub fn interaction_penalty(
    model: &SpinModel,
    site: &Site,
    neighbor_values: &[f64],
    epsilon: f64,
    c: f64,
    c_hat: f64,
    grid: Grid1d,
) -> Result<f64> {
    if epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tilt strength must be nonnegative, got {epsilon}"
        )));
    }
    let nodes = grid.nodes();
    let tw = grid.weights();
    let n = nodes.len();

    let base: Vec<f64> = nodes
        .iter()
        .map(|&x| model.one_site_log_density(x, neighbor_values))
        .collect();
    let tilted: Vec<f64> = nodes
        .iter()
        .zip(&base)
        .map(|(&x, &l)| l + epsilon * interaction_load(model, x, neighbor_values, c))
        .collect();

    let log_tail = TAIL_RTOL.ln();
    for (what, logd) in [("conditional density", &base), ("tilted integrand", &tilted)] {
        let m = logd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if logd[0] - m > log_tail || logd[n - 1] - m > log_tail {
            return Err(Error::TailNotContained {
                what: format!("{what} at {site}"),
                hint: "shrink epsilon or enlarge the grid".into(),
            });
        }
    }

    let m0 = base.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let m1 = tilted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z0: f64 = base.iter().zip(&tw).map(|(l, w)| w * (l - m0).exp()).sum();
    let z1: f64 = tilted.iter().zip(&tw).map(|(l, w)| w * (l - m1).exp()).sum();
    Ok(c_hat * (m1 - m0 + z1.ln() - z0.ln()))
}

/// Halve epsilon until the tilted moment is contained; returns the penalty
/// together with the epsilon actually used.
pub fn penalty_with_backoff(
    model: &SpinModel,
    site: &Site,
    neighbor_values: &[f64],
    epsilon: f64,
    c: f64,
    c_hat: f64,
    grid: Grid1d,
) -> Result<(f64, f64)> {
    let mut eps = epsilon;
    for _ in 0..48 {
        match interaction_penalty(model, site, neighbor_values, eps, c, c_hat, grid) {
            Ok(u) => return Ok((u, eps)),
            Err(Error::TailNotContained { .. }) => eps /= 2.0,
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidParameter(
        "no epsilon small enough to contain the tilted moment".into(),
    ))
}

/// Penalty as a function of a constant boundary value, all at one shared
/// epsilon (the largest halving of `epsilon` that is contained at every
/// swept value).
pub fn penalty_curve(
    model: &SpinModel,
    site: &Site,
    omegas: &[f64],
    epsilon: f64,
    c: f64,
    c_hat: f64,
    grid: Grid1d,
) -> Result<(Vec<(f64, f64)>, f64)> {
    let degree = 2 * model.d;
    let mut eps = epsilon;
    for &omega in omegas {
        let zs = vec![omega; degree];
        let (_, used) = penalty_with_backoff(model, site, &zs, eps, c, c_hat, grid)?;
        eps = eps.min(used);
    }
    let mut curve = Vec::with_capacity(omegas.len());
    for &omega in omegas {
        let zs = vec![omega; degree];
        let u = interaction_penalty(model, site, &zs, eps, c, c_hat, grid)?;
        curve.push((omega, u));
    }
    Ok((curve, eps))
}

#[derive(Clone, Debug)]
pub struct SquareMomentReport {
    /// Epsilon shared by every sampled evaluation.
    pub epsilon: f64,
    pub mu_u2: McEstimate,
    /// Empirical bound: mean plus three standard errors.
    pub k_check: f64,
}

/// Monte Carlo second moment of the penalty at `site`, with the neighbour
/// values taken from the running box configuration.
#[allow(clippy::too_many_arguments)]
pub fn check_square_moment(
    model: &SpinModel,
    site: &Site,
    box_radius: u32,
    boundary: &Boundary,
    epsilon: f64,
    c: f64,
    c_hat: f64,
    grid: Grid1d,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> Result<SquareMomentReport> {
    if !model.is_attractive_nonnegative() {
        return Err(Error::InvalidParameter(
            "the square-moment check needs j >= 0 and a nonnegative potential".into(),
        ));
    }
    let mut sampler = BlockGibbs::new(model, box_radius, boundary, grid, seed)?;
    let mut configs: Vec<Vec<f64>> = Vec::with_capacity(samples);
    sampler.run(burn_in, samples, |state| configs.push(state.to_vec()));
    let sites = sampler.sites().to_vec();
    let pos = |s: &Site| sites.binary_search(s).ok();

    let neighbor_values = |config: &[f64]| -> Vec<f64> {
        neighbors(site)
            .into_iter()
            .map(|nb| match pos(&nb) {
                Some(p) => config[p],
                None => boundary.at(&nb),
            })
            .collect()
    };

    let mut eps = epsilon;
    'attempt: for _ in 0..48 {
        let mut u2 = Vec::with_capacity(configs.len());
        for config in &configs {
            let zs = neighbor_values(config);
            match interaction_penalty(model, site, &zs, eps, c, c_hat, grid) {
                Ok(u) => u2.push(u * u),
                Err(Error::TailNotContained { .. }) => {
                    eps /= 2.0;
                    continue 'attempt;
                }
                Err(e) => return Err(e),
            }
        }
        let mu_u2 = batch_means(&u2, 32);
        return Ok(SquareMomentReport {
            epsilon: eps,
            k_check: mu_u2.mean + 3.0 * mu_u2.stderr,
            mu_u2,
        });
    }
    Err(Error::InvalidParameter(
        "no epsilon small enough to contain the tilted moment".into(),
    ))
}

#[derive(Clone, Debug)]
pub struct OmegaSlack {
    pub omega: f64,
    pub penalty: f64,
    pub sup_ratio: f64,
    /// Constant this boundary value alone would require.
    pub needed: f64,
}

#[derive(Clone, Debug)]
pub struct PerturbedLsReport {
    pub epsilon: f64,
    /// Smallest constant r with Ent(f^2) <= (r + j0 * penalty) * E|f'|^2
    /// across the probe family and every swept boundary value.
    pub r_hat: f64,
    pub per_omega: Vec<OmegaSlack>,
}

/// Penalty-shifted log-Sobolev constant over a boundary sweep.
pub fn perturbed_ls_check(
    model: &SpinModel,
    site: &Site,
    omegas: &[f64],
    epsilon: f64,
    c: f64,
    c_hat: f64,
    grid: Grid1d,
) -> Result<PerturbedLsReport> {
    let (curve, eps) = penalty_curve(model, site, omegas, epsilon, c, c_hat, grid)?;
    let mut per_omega = Vec::with_capacity(curve.len());
    let mut r_hat = 0.0f64;
    for (omega, penalty) in curve {
        let m = OneSiteMeasure::conditional(model, site, &Boundary::constant(omega), grid)?;
        let scan = scan_probes(&m, RatioKind::LogSobolev, |x| x * x)?;
        let needed = (scan.sup_ratio - model.j0 * penalty).max(0.0);
        r_hat = r_hat.max(needed);
        per_omega.push(OmegaSlack {
            omega,
            penalty,
            sup_ratio: scan.sup_ratio,
            needed,
        });
    }
    Ok(PerturbedLsReport {
        epsilon: eps,
        r_hat,
        per_omega,
    })
}
