//! Shell-by-shell conditional averaging of gridded functions, convergence
//! tracing toward the box mean, and the two inequalities that drive the
//! decay estimates: the gradient bound for swept functions and the
//! conditional entropy decay along the sweep.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid_fn::GriddedFunction;
use crate::lattice::{neighbors, shell_in_box, LatticeRegion, Site};
use crate::model::{Boundary, SpinModel};
use crate::orlicz::HFunction;
use crate::sampler::{batch_means, BlockGibbs, McEstimate};

/// Trace deviations below this are treated as exact zeros of the sweep.
pub const DEVIATION_FLOOR: f64 = 1e-14;

/// Average out every support site that belongs to the given shell. Shell
/// sites must be pairwise non-adjacent so the one-site integrals commute.
pub fn conditional_expectation_shell(
    f: &GriddedFunction,
    shell: &LatticeRegion,
    model: &SpinModel,
    boundary: &Boundary,
    within: &LatticeRegion,
) -> Result<GriddedFunction> {
    let sites = shell.sites();
    for (a, s1) in sites.iter().enumerate() {
        for s2 in &sites[a + 1..] {
            if s1.l1_distance(s2) == 1 {
                return Err(Error::InvalidParameter(format!(
                    "shell sites {s1} and {s2} are adjacent"
                )));
            }
        }
    }
    let mut g = f.clone();
    for site in sites {
        if g.support().binary_search(site).is_ok() {
            g = g.integrate_site(site, model, boundary, within)?;
        }
    }
    Ok(g)
}

#[derive(Clone, Debug)]
pub struct TraceStep {
    pub shell: u32,
    pub support_size: usize,
    /// Value at the reference configuration (boundary fill everywhere).
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct SweepTrace {
    pub start_shell: u32,
    pub end_shell: u32,
    pub initial_value: f64,
    pub steps: Vec<TraceStep>,
    pub result: GriddedFunction,
}

impl SweepTrace {
    pub fn final_value(&self) -> f64 {
        self.steps.last().map_or(self.initial_value, |s| s.value)
    }

    /// Distance of each step value from the trace's own limit.
    pub fn deviations(&self) -> Vec<f64> {
        let limit = self.final_value();
        self.steps.iter().map(|s| (s.value - limit).abs()).collect()
    }
}

/// Sweep the shells s, s+1, ..., n in that order. The support must start
/// inside the ball of radius s; afterwards it alternates between the two
/// parity classes of the box.
pub fn apply_sweep(
    f: &GriddedFunction,
    n: u32,
    s: u32,
    model: &SpinModel,
    boundary: &Boundary,
    box_radius: u32,
) -> Result<SweepTrace> {
    if n < s {
        return Err(Error::InvalidParameter(format!(
            "sweep range is empty: n = {n} < s = {s}"
        )));
    }
    for site in f.support() {
        if site.l1_norm() > s {
            return Err(Error::InvalidParameter(format!(
                "support site {site} lies outside the ball of radius {s}"
            )));
        }
    }
    let within = LatticeRegion::cube(model.d, box_radius);
    let reference = boundary.fill();
    let mut g = f.clone();
    let initial_value = g.eval_uniform(reference)?;
    let mut steps = Vec::with_capacity((n - s + 1) as usize);
    for k in s..=n {
        let sh = shell_in_box(k, model.d, box_radius);
        g = conditional_expectation_shell(&g, &sh, model, boundary, &within)?;
        steps.push(TraceStep {
            shell: k,
            support_size: g.support().len(),
            value: g.eval_uniform(reference)?,
        });
    }
    Ok(SweepTrace {
        start_shell: s,
        end_shell: n,
        initial_value,
        steps,
        result: g,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateFit {
    /// Deviations sat below the numerical floor over the fitting window.
    BelowFloor,
    Geometric(f64),
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub deviations: Vec<f64>,
    pub rate: RateFit,
    /// |trace limit - MC mean|.
    pub final_gap: f64,
    pub limit_ok: bool,
    /// Shell from which the deviations decrease strictly until they hit
    /// the floor.
    pub decreasing_from: Option<u32>,
}

/// Least-squares slope and intercept of ln(y) against x.
fn log_slope_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1.ln()).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1.ln()).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-12 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / n;
    Some((slope, intercept))
}

pub fn convergence_diagnostic(
    trace: &SweepTrace,
    mu_estimate: &McEstimate,
) -> Result<ConvergenceReport> {
    let m = trace.steps.len();
    if m < 6 {
        return Err(Error::InvalidParameter(format!(
            "convergence diagnostic needs at least 6 sweep steps, got {m}"
        )));
    }
    let deviations = trace.deviations();

    // fit over the tail half, excluding the defining final step and
    // anything at the floor
    let start = m / 2;
    let pts: Vec<(f64, f64)> = (start..m - 1)
        .filter(|&i| deviations[i] >= DEVIATION_FLOOR)
        .map(|i| (trace.steps[i].shell as f64, deviations[i]))
        .collect();
    let rate = match log_slope_fit(&pts) {
        Some((slope, _)) => RateFit::Geometric(slope.exp()),
        None => RateFit::BelowFloor,
    };

    // last index still above the floor
    let mut last = None;
    for (i, d) in deviations.iter().enumerate() {
        if *d >= DEVIATION_FLOOR {
            last = Some(i);
        }
    }
    let decreasing_from = last.and_then(|last| {
        let mut from = None;
        for i in (0..last).rev() {
            if deviations[i] > deviations[i + 1] {
                from = Some(trace.steps[i].shell);
            } else {
                break;
            }
        }
        from
    });

    let final_gap = (trace.final_value() - mu_estimate.mean).abs();
    Ok(ConvergenceReport {
        deviations,
        rate,
        final_gap,
        limit_ok: final_gap < 3.0 * mu_estimate.stderr,
        decreasing_from,
    })
}

#[derive(Clone, Debug)]
pub struct GradientSiteDetail {
    pub site: Site,
    pub eta_needed: f64,
    /// Worst-case sample values behind eta_needed.
    pub lhs: f64,
    pub t_same: f64,
    pub t_swept: f64,
}

#[derive(Clone, Debug)]
pub struct GradientSweepReport {
    pub eta_min: f64,
    pub samples: usize,
    pub detail: Vec<GradientSiteDetail>,
}

/// For boundary sites i one ring outside shell k, compare the squared
/// derivative of the partially averaged function against twice the averaged
/// squared derivative plus eta times the swept-direction terms; returns the
/// smallest eta that makes the bound hold across sampled configurations.
pub fn check_gradient_sweep(
    model: &SpinModel,
    f: &GriddedFunction,
    k: u32,
    boundary_samples: usize,
    seed: u64,
) -> Result<GradientSweepReport> {
    let d = model.d;
    let grid = f.grid();
    let within = LatticeRegion::cube(d, k + 1);

    // candidate boundary sites: next shell out, touching the support
    let mut candidates: Vec<Site> = Vec::new();
    for i in crate::lattice::shell(k + 1, d).sites() {
        let touches = f.support().binary_search(i).is_ok()
            || f.support().iter().any(|s| s.l1_distance(i) == 1);
        if touches {
            candidates.push(i.clone());
        }
    }

    struct Prepared {
        site: Site,
        averaged: GriddedFunction,
        t_same: GriddedFunction,
        t_swept: Option<GriddedFunction>,
    }

    let boundary = Boundary::constant(0.0); // never consulted: all neighbours stay inside `within`
    let mut prepared = Vec::new();
    for i in &candidates {
        let swept: Vec<Site> = neighbors(i)
            .into_iter()
            .filter(|j| j.l1_norm() <= k)
            .collect();
        let integrate = |h: &GriddedFunction| -> Result<GriddedFunction> {
            let mut out = h.clone();
            for j in &swept {
                if out.support().binary_search(j).is_ok() {
                    out = out.integrate_site(j, model, &boundary, &within)?;
                }
            }
            Ok(out)
        };
        let averaged = integrate(f)?;
        let t_same = integrate(&f.derivative(i).map(|v| v * v))?;
        let mut t_swept: Option<GriddedFunction> = None;
        for j in &swept {
            if f.support().binary_search(j).is_err() {
                continue;
            }
            let term = integrate(&f.derivative(j).map(|v| v * v))?;
            t_swept = Some(match t_swept {
                None => term,
                Some(acc) => acc.zip_with(&term, |a, b| a + b)?,
            });
        }
        prepared.push(Prepared {
            site: i.clone(),
            averaged,
            t_same,
            t_swept,
        });
    }

    // sampled configurations cover every coordinate any prepared tensor uses
    let mut coords: Vec<Site> = LatticeRegion::cube(d, k + 2).sites().to_vec();
    for s in f.support() {
        if !coords.contains(s) {
            coords.push(s.clone());
        }
    }
    coords.sort();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = grid.spacing();
    let mut eta_min = 0.0f64;
    let mut detail: Vec<GradientSiteDetail> = prepared
        .iter()
        .map(|p| GradientSiteDetail {
            site: p.site.clone(),
            eta_needed: 0.0,
            lhs: 0.0,
            t_same: 0.0,
            t_swept: 0.0,
        })
        .collect();

    for _ in 0..boundary_samples {
        let mut assign: BTreeMap<Site, f64> = BTreeMap::new();
        for c in &coords {
            assign.insert(c.clone(), rng.gen_range(-2.0..2.0));
        }
        for (p, det) in prepared.iter().zip(detail.iter_mut()) {
            let lhs = if p.averaged.support().binary_search(&p.site).is_ok() {
                let x = assign[&p.site];
                let mut hi = assign.clone();
                hi.insert(p.site.clone(), x + h);
                let mut lo = assign.clone();
                lo.insert(p.site.clone(), x - h);
                let fd = (p.averaged.eval(&hi)? - p.averaged.eval(&lo)?) / (2.0 * h);
                fd * fd
            } else {
                0.0
            };
            let t_same = p.t_same.eval(&assign)?;
            let t_swept = match &p.t_swept {
                Some(t) => t.eval(&assign)?,
                None => 0.0,
            };
            let excess = lhs - 2.0 * t_same;
            let eta = if t_swept > 1e-13 {
                (excess / t_swept).max(0.0)
            } else if excess <= 1e-11 * (1.0 + t_same) {
                0.0
            } else {
                f64::INFINITY
            };
            if eta > det.eta_needed {
                det.eta_needed = eta;
                det.lhs = lhs;
                det.t_same = t_same;
                det.t_swept = t_swept;
            }
            eta_min = eta_min.max(eta);
        }
    }

    Ok(GradientSweepReport {
        eta_min,
        samples: boundary_samples,
        detail,
    })
}

#[derive(Clone, Debug)]
pub struct DecayRow {
    pub shell: u32,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug)]
pub struct LambdaDecay {
    pub lambda: f64,
    /// a * c * omega_H(lambda / 2): the scale the fitted level is read
    /// against.
    pub bound_scale: f64,
    pub rows: Vec<DecayRow>,
    /// Fitted geometric ratio across shells, when enough rows sit above the
    /// floor.
    pub rate: Option<f64>,
    /// Fitted level at the starting shell divided by bound_scale.
    pub c1_emp: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EntropyDecayReport {
    /// Grid maximum of the summed H-weighted squared derivatives of f.
    pub grad_budget: f64,
    pub per_lambda: Vec<LambdaDecay>,
}

/// Normalized one-site quadrature weights (trapezoid times conditional
/// density) for a spin with the given neighbour values.
fn conditional_row(
    model: &SpinModel,
    nodes: &[f64],
    tw: &[f64],
    zs: &[f64],
    site: &Site,
) -> Result<Vec<f64>> {
    let n = nodes.len();
    let logd: Vec<f64> = nodes
        .iter()
        .map(|&x| model.one_site_log_density(x, zs))
        .collect();
    let m = logd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = logd.iter().map(|l| (l - m).exp()).collect();
    if dens[0].max(dens[n - 1]) > crate::measure::TAIL_RTOL {
        return Err(Error::TailNotContained {
            what: format!("conditional weights at {site}"),
            hint: "enlarge the grid half-width".into(),
        });
    }
    let mut row: Vec<f64> = dens.iter().zip(tw).map(|(d, w)| d * w).collect();
    let z: f64 = row.iter().sum();
    for r in row.iter_mut() {
        *r /= z;
    }
    Ok(row)
}

/// Collapse a row-major tensor axis by axis against per-axis weight vectors.
fn contract(values: &[f64], n: usize, axis_weights: &[Vec<f64>]) -> f64 {
    let k = axis_weights.len();
    if k == 0 {
        return values[0];
    }
    let w = &axis_weights[k - 1];
    let mut cur: Vec<f64> = values
        .chunks_exact(n)
        .map(|chunk| chunk.iter().zip(w).map(|(v, w)| v * w).sum())
        .collect();
    for a in (0..k - 1).rev() {
        let w = &axis_weights[a];
        cur = cur
            .chunks_exact(n)
            .map(|chunk| chunk.iter().zip(w).map(|(v, w)| v * w).sum())
            .collect();
    }
    cur[0]
}

/// Monte Carlo over box configurations of the conditional entropy of
/// exp(lambda * swept f) under the product of one-site conditionals on the
/// next shell, per sweep depth; fits the geometric decay across depths.
#[allow(clippy::too_many_arguments)]
pub fn check_entropy_decay(
    model: &SpinModel,
    f: &GriddedFunction,
    h: &HFunction,
    c_scale: f64,
    s: u32,
    k_max: u32,
    lambdas: &[f64],
    box_radius: u32,
    boundary: &Boundary,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> Result<EntropyDecayReport> {
    let grid = f.grid();
    let n = grid.n;
    let within = LatticeRegion::cube(model.d, box_radius);

    // gradient budget of the target on the grid
    let mut grad_sum: Option<GriddedFunction> = None;
    for site in f.support().to_vec() {
        let term = f.derivative(&site).map(|v| h.eval(v.abs()));
        grad_sum = Some(match grad_sum {
            None => term,
            Some(acc) => acc.zip_with(&term, |a, b| a + b)?,
        });
    }
    let grad_budget = grad_sum.map_or(0.0, |g| g.max_value());

    // one sweep pass, keeping the intermediate functions
    let mut swept: Vec<(u32, GriddedFunction)> = Vec::new();
    let mut g = f.clone();
    for site in g.support() {
        if site.l1_norm() > s {
            return Err(Error::InvalidParameter(format!(
                "support site {site} lies outside the ball of radius {s}"
            )));
        }
    }
    for k in s..=k_max {
        let sh = shell_in_box(k, model.d, box_radius);
        g = conditional_expectation_shell(&g, &sh, model, boundary, &within)?;
        swept.push((k, g.clone()));
    }

    // shared sample set across depths and lambdas
    let mut sampler = BlockGibbs::new(model, box_radius, boundary, grid, seed)?;
    let mut configs: Vec<Vec<f64>> = Vec::with_capacity(samples);
    sampler.run(burn_in, samples, |state| configs.push(state.to_vec()));
    let box_sites: Vec<Site> = sampler.sites().to_vec();
    let site_pos: BTreeMap<&Site, usize> =
        box_sites.iter().enumerate().map(|(i, s)| (s, i)).collect();

    let nodes = grid.nodes();
    let tw = grid.weights();
    let envelope = h.envelope()?;

    let mut per_lambda = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let bound_scale = grad_budget * c_scale * envelope.omega_at(lambda / 2.0);
        let mut rows = Vec::with_capacity(swept.len());
        for (k, gk) in &swept {
            if lambda == 0.0 {
                rows.push(DecayRow {
                    shell: *k,
                    mean: 0.0,
                    stderr: 0.0,
                });
                continue;
            }
            let u = gk.map(|v| (lambda * v).exp());
            let v = gk.map(|v| lambda * v * (lambda * v).exp());
            let ratios: Result<Vec<f64>> = configs
                .iter()
                .map(|config| {
                    let mut weights = Vec::with_capacity(gk.support().len());
                    for site in gk.support() {
                        let zs: Vec<f64> = neighbors(site)
                            .into_iter()
                            .map(|nb| match site_pos.get(&nb) {
                                Some(&p) => config[p],
                                None => boundary.at(&nb),
                            })
                            .collect();
                        weights.push(conditional_row(model, &nodes, &tw, &zs, site)?);
                    }
                    let z = contract(u.values(), n, &weights);
                    let num = contract(v.values(), n, &weights);
                    Ok(num / z - z.ln())
                })
                .collect();
            let est = batch_means(&ratios?, 32);
            rows.push(DecayRow {
                shell: *k,
                mean: est.mean,
                stderr: est.stderr,
            });
        }
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.mean > DEVIATION_FLOOR)
            .map(|r| (r.shell as f64, r.mean))
            .collect();
        let fit = log_slope_fit(&pts);
        let rate = fit.map(|(slope, _)| slope.exp());
        let c1_emp = fit.map(|(slope, intercept)| {
            let level = (intercept + slope * s as f64).exp();
            if bound_scale > 0.0 {
                level / bound_scale
            } else {
                f64::INFINITY
            }
        });
        per_lambda.push(LambdaDecay {
            lambda,
            bound_scale,
            rows,
            rate,
            c1_emp,
        });
    }

    Ok(EntropyDecayReport {
        grad_budget,
        per_lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianExact;
    use crate::measure::{Grid1d, OneSiteMeasure};
    use crate::model::{Phase, Potential};
    use crate::orlicz::{modification, YoungFunction};
    use approx::assert_relative_eq;

    fn model(j: f64) -> SpinModel {
        SpinModel {
            d: 1,
            phase: Phase::Gaussian,
            potential: Potential::Bilinear,
            j,
            j0: 0.1,
        }
    }

    // 33^4 stays inside the tensor budget and the half-width keeps
    // conditional rows contained even at extreme neighbour corners
    fn sweep_grid() -> Grid1d {
        Grid1d::new(10.0, 33).unwrap()
    }

    fn x0(grid: Grid1d) -> GriddedFunction {
        GriddedFunction::from_fn(vec![Site(vec![0])], grid, |a| a[0]).unwrap()
    }

    #[test]
    fn constants_pass_through_every_step_unchanged() {
        let f = GriddedFunction::constant(sweep_grid(), -1.5);
        let trace = apply_sweep(&f, 8, 0, &model(0.1), &Boundary::constant(1.0), 3).unwrap();
        assert_eq!(trace.initial_value, -1.5);
        for step in &trace.steps {
            assert_eq!(step.value, -1.5);
            assert_eq!(step.support_size, 0);
        }
    }

    #[test]
    fn one_step_is_the_one_site_integral() {
        let g = sweep_grid();
        let f = GriddedFunction::from_fn(vec![Site(vec![0])], g, |a| a[0].tanh()).unwrap();
        // the fill sits on a grid node, so the trace value is not interpolated
        let m = model(0.1);
        let omega = Boundary::constant(1.25);
        let trace = apply_sweep(&f, 0, 0, &m, &omega, 3).unwrap();
        let law = OneSiteMeasure::conditional(&m, &Site(vec![0]), &omega, g).unwrap();
        assert_relative_eq!(
            trace.final_value(),
            law.expect(|x| x.tanh()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn no_interaction_traces_are_flat_after_the_first_step() {
        let g = sweep_grid();
        let f = GriddedFunction::from_fn(vec![Site(vec![0])], g, |a| a[0].tanh()).unwrap();
        let trace = apply_sweep(&f, 9, 0, &model(0.0), &Boundary::constant(0.5), 3).unwrap();
        let devs = trace.deviations();
        for d in &devs {
            assert!(*d < DEVIATION_FLOOR);
        }
        let est = McEstimate {
            mean: trace.final_value(),
            stderr: 1e-3,
            n: 100,
        };
        let report = convergence_diagnostic(&trace, &est).unwrap();
        assert_eq!(report.rate, RateFit::BelowFloor);
        assert!(report.limit_ok);
    }

    #[test]
    fn support_alternates_between_parity_classes() {
        let g = sweep_grid();
        let f = GriddedFunction::from_fn(
            vec![Site(vec![0]), Site(vec![1])],
            g,
            |a| a[0] * a[1],
        )
        .unwrap();
        let trace = apply_sweep(&f, 7, 1, &model(0.05), &Boundary::constant(0.0), 2).unwrap();
        // after integrating shell k only the opposite parity class remains
        let mut h = f.clone();
        let m = model(0.05);
        let within = LatticeRegion::cube(1, 2);
        for k in 1..=7u32 {
            let sh = shell_in_box(k, 1, 2);
            h = conditional_expectation_shell(&h, &sh, &m, &Boundary::constant(0.0), &within)
                .unwrap();
            for site in h.support() {
                assert_eq!(u32::from(site.parity()), (k + 1) % 2, "after shell {k}");
            }
        }
        assert_eq!(trace.steps.len(), 7);
    }

    #[test]
    fn start_shell_condition_is_enforced() {
        let g = sweep_grid();
        let f = GriddedFunction::from_fn(
            vec![Site(vec![0]), Site(vec![3])],
            g,
            |a| a[0] + a[1],
        )
        .unwrap();
        let err = apply_sweep(&f, 5, 1, &model(0.05), &Boundary::constant(0.0), 3);
        assert!(err.is_err());
        assert!(apply_sweep(&f, 5, 3, &model(0.05), &Boundary::constant(0.0), 3).is_ok());
    }

    #[test]
    fn gaussian_sweep_converges_to_the_exact_conditional_mean() {
        let m = model(0.1);
        let omega = Boundary::constant(1.0);
        let f = x0(sweep_grid());
        let trace = apply_sweep(&f, 15, 0, &m, &omega, 2).unwrap();
        let exact = GaussianExact::new(&m, 2, &omega).unwrap();
        let want = exact.mean_at(&Site(vec![0])).unwrap();
        assert_relative_eq!(trace.final_value(), want, epsilon = 1e-8);

        let est = McEstimate {
            mean: want,
            stderr: 1e-6,
            n: 1,
        };
        let report = convergence_diagnostic(&trace, &est).unwrap();
        assert!(report.limit_ok);
        match report.rate {
            RateFit::Geometric(r) => assert!(r < 0.5, "rate {r}"),
            RateFit::BelowFloor => panic!("expected a geometric fit"),
        }
        // strictly decreasing once the transient clears
        let devs = &report.deviations;
        let live = devs.iter().take_while(|d| **d >= DEVIATION_FLOOR).count();
        for i in 2..live.saturating_sub(1) {
            assert!(devs[i] > devs[i + 1], "deviation rose at step {i}");
        }
    }

    #[test]
    fn sweep_rate_grows_with_the_squared_coupling() {
        let omega = Boundary::constant(1.0);
        let mut rates = Vec::new();
        for j in [0.05, 0.1] {
            let trace = apply_sweep(&x0(sweep_grid()), 17, 0, &model(j), &omega, 2).unwrap();
            let est = McEstimate {
                mean: trace.final_value(),
                stderr: 1e-6,
                n: 1,
            };
            match convergence_diagnostic(&trace, &est).unwrap().rate {
                RateFit::Geometric(r) => rates.push(r),
                RateFit::BelowFloor => panic!("deviations collapsed too early"),
            }
        }
        let ratio = rates[1] / rates[0];
        assert!(
            (2.0..=8.0).contains(&ratio),
            "rate ratio {ratio} outside the doubling band"
        );
    }

    #[test]
    fn opposite_boundaries_reach_matching_limits() {
        let m = model(0.05);
        let f = x0(sweep_grid());
        let mut limits = Vec::new();
        for fill in [2.0, -2.0] {
            let omega = Boundary::constant(fill);
            let trace = apply_sweep(&f, 16, 0, &m, &omega, 3).unwrap();
            let exact = GaussianExact::new(&m, 3, &omega).unwrap();
            let want = exact.mean_at(&Site(vec![0])).unwrap();
            assert_relative_eq!(trace.final_value(), want, epsilon = 1e-8);
            limits.push(trace.final_value());
        }
        // the boundary influence decays through three shells of coupling 0.05
        assert!((limits[0] - limits[1]).abs() < 2e-3);
    }

    #[test]
    fn boundary_derivative_bound_is_exactly_quadratic_for_the_linear_probe() {
        // f = x_0, k = 0: the averaged function is -j (x_{-1} + x_1), so the
        // boundary derivative is -j, the same-direction term vanishes, and
        // the swept term is 1.
        for j in [0.025, 0.05, 0.1] {
            let report =
                check_gradient_sweep(&model(j), &x0(sweep_grid()), 0, 25, 7).unwrap();
            assert_relative_eq!(report.eta_min, j * j, max_relative = 1e-6);
        }
    }

    #[test]
    fn no_interaction_needs_no_swept_slack() {
        let g = sweep_grid();
        let f = GriddedFunction::from_fn(vec![Site(vec![0])], g, |a| a[0].tanh()).unwrap();
        let report = check_gradient_sweep(&model(0.0), &f, 0, 40, 3).unwrap();
        assert_eq!(report.eta_min, 0.0);
    }

    #[test]
    fn bounded_probe_keeps_eta_below_one_at_small_coupling() {
        let g = sweep_grid();
        let f = GriddedFunction::from_fn(vec![Site(vec![0])], g, |a| a[0].tanh()).unwrap();
        let report = check_gradient_sweep(&model(0.05), &f, 0, 60, 11).unwrap();
        assert!(report.eta_min < 1.0, "eta {}", report.eta_min);
        assert!(report.eta_min.is_finite());
    }

    #[test]
    fn entropy_decay_is_geometric_and_vanishes_without_coupling() {
        let grid = Grid1d::new(10.0, 33).unwrap();
        let f = GriddedFunction::from_fn(vec![Site(vec![0])], grid, |a| a[0].tanh()).unwrap();
        let h = modification(&YoungFunction::power(2.0).unwrap()).unwrap();
        let omega = Boundary::constant(0.0);

        let report = check_entropy_decay(
            &model(0.05),
            &f,
            &h,
            2.0,
            0,
            4,
            &[0.0, 1.0],
            2,
            &omega,
            200,
            400,
            42,
        )
        .unwrap();
        // tanh' = sech^2 peaks at 1; central differences on a coarse grid
        // under-resolve the peak but never exceed it
        assert!(report.grad_budget <= 1.0 + 1e-12);
        assert!(report.grad_budget > 0.5, "budget {}", report.grad_budget);

        let zero = &report.per_lambda[0];
        for row in &zero.rows {
            assert_eq!(row.mean, 0.0);
        }

        let one = &report.per_lambda[1];
        for w in one.rows.windows(2) {
            assert!(
                w[1].mean <= w[0].mean + 3.0 * (w[0].stderr + w[1].stderr) + 1e-12,
                "entropy rose from shell {} to {}",
                w[0].shell,
                w[1].shell
            );
        }
        let rate = one.rate.expect("enough rows above floor");
        assert!(rate < 1.0, "rate {rate}");
        assert!(one.rows[0].mean > 0.0);

        let flat = check_entropy_decay(
            &model(0.0),
            &f,
            &h,
            2.0,
            0,
            3,
            &[1.0],
            2,
            &omega,
            100,
            200,
            42,
        )
        .unwrap();
        for row in &flat.per_lambda[0].rows {
            assert!(row.mean.abs() < 3.0 * row.stderr + 1e-12);
        }
    }
}
