//! Named experiment scenarios: each binds library checks into a
//! reproducible run that writes CSV tables and one verdict line per
//! acceptance item it covers.

use std::path::Path;
use std::time::Instant;

use crate::concentration::{
    dominance_check, empirical_tail, enlargement_probability, talagrand_check, Envelope, Gauge,
};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::functionals::{
    check_mls_implies_sg, estimate_constant, probe_family, product_ls_ratio, scan_probes,
    spectral_gap, tilt_grid, FactoredProbe, RatioKind,
};
use crate::gaussian::GaussianExact;
use crate::grid_fn::GriddedFunction;
use crate::lattice::{LatticeRegion, Site};
use crate::measure::{Grid1d, OneSiteMeasure};
use crate::model::{Boundary, Phase, Potential, SpinModel};
use crate::orlicz::{
    check_h2, check_young_lemmas, conjugate, herbst_integral, modification, HFunction,
    YoungFunction,
};
use crate::perturbation::{check_square_moment, perturbed_ls_check};
use crate::report::{
    fmt_f64, verdict_table, write_csv, write_manifest, RunArtifact, Table, Verdict,
};
use crate::sampler::estimate_mu;
use crate::sweep::{apply_sweep, check_entropy_decay, check_gradient_sweep, convergence_diagnostic, RateFit};

/// Registry of runnable scenarios with one-line summaries.
pub fn registry() -> &'static [(&'static str, &'static str)] {
    &[
        ("orlicz-suite", "conjugate duality, Young slack, growth-envelope integral checks"),
        ("one-site-constants", "exact spectral gap and probe suprema of the one-site measure"),
        ("tensorisation", "two-site product probe supremum against the single-site value"),
        ("sweep-convergence", "shell sweep deviations, geometric rate, limit agreement"),
        ("gradient-sweep", "derivative transfer factor over sampled boundaries"),
        ("entropy-decay", "per-shell entropy terms under the sweep, decay rate"),
        ("tail-product", "product-measure tail against the envelope, normal oracle"),
        ("tail-gibbs", "coupled-measure tail dominance on the valid radius range"),
        ("enlargement", "gauge-ball enlargement complement against the exponential bound"),
        ("talagrand", "two-ball enlargement membership curve"),
        ("perturbation-s3", "perturbed-measure constant, penalty moment, 4/3-gauge enlargement"),
    ]
}

pub fn lookup(name: &str) -> Result<()> {
    if registry().iter().any(|(n, _)| *n == name) {
        Ok(())
    } else {
        let names: Vec<&str> = registry().iter().map(|(n, _)| *n).collect();
        Err(Error::InvalidParameter(format!(
            "unknown scenario '{name}'; valid names: {}",
            names.join(", ")
        )))
    }
}

/// Executes the configured scenario and writes all artifacts under
/// `out_dir`. CSV bytes depend only on (config, seed).
pub fn run(cfg: &ExperimentConfig, config_echo: &str, out_dir: &Path) -> Result<RunArtifact> {
    cfg.validate()?;
    lookup(&cfg.scenario)?;
    let started = Instant::now();
    let (tables, verdicts) = dispatch(cfg)?;
    let mut csv_hashes = Vec::new();
    for table in &tables {
        let (path, hash) = write_csv(out_dir, table)?;
        let name = path
            .file_name()
            .expect("csv file name")
            .to_string_lossy()
            .into_owned();
        csv_hashes.push((name, hash));
    }
    let (vpath, vhash) = write_csv(out_dir, &verdict_table(&verdicts))?;
    csv_hashes.push((
        vpath.file_name().expect("file name").to_string_lossy().into_owned(),
        vhash,
    ));
    let all_pass = verdicts.iter().all(|v| v.pass);
    write_manifest(
        out_dir,
        &cfg.scenario,
        config_echo,
        &csv_hashes,
        started.elapsed().as_secs_f64(),
        all_pass,
    )?;
    Ok(RunArtifact {
        out_dir: out_dir.to_path_buf(),
        verdicts,
        csv_hashes,
    })
}

fn dispatch(cfg: &ExperimentConfig) -> Result<(Vec<Table>, Vec<Verdict>)> {
    match cfg.scenario.as_str() {
        "orlicz-suite" => orlicz_suite(cfg),
        "one-site-constants" => one_site_constants(cfg),
        "tensorisation" => tensorisation(cfg),
        "sweep-convergence" => sweep_convergence(cfg),
        "gradient-sweep" => gradient_sweep(cfg),
        "entropy-decay" => entropy_decay(cfg),
        "tail-product" => tail_product(cfg),
        "tail-gibbs" => tail_gibbs(cfg),
        "enlargement" => enlargement(cfg),
        "talagrand" => talagrand(cfg),
        "perturbation-s3" => perturbation_s3(cfg),
        other => Err(Error::InvalidParameter(format!("unknown scenario '{other}'"))),
    }
}

fn origin(d: usize) -> Site {
    Site::origin(d)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Observable on box configurations, keyed by name. The state slice follows
/// the sorted site order of the sampler.
fn observable(
    name: &str,
    d: usize,
    box_radius: u32,
) -> Result<Box<dyn Fn(&[f64]) -> f64 + Sync>> {
    let region = LatticeRegion::cube(d, box_radius);
    let idx = region
        .sites()
        .iter()
        .position(|s| *s == origin(d))
        .expect("cube contains the origin");
    match name {
        "normalized-sum" => Ok(Box::new(|state: &[f64]| {
            state.iter().sum::<f64>() / (state.len() as f64).sqrt()
        })),
        "x0" => Ok(Box::new(move |state: &[f64]| state[idx])),
        "tanh-x0" => Ok(Box::new(move |state: &[f64]| state[idx].tanh())),
        other => Err(Error::InvalidParameter(format!(
            "unknown observable '{other}'; use normalized-sum, x0, or tanh-x0"
        ))),
    }
}

/// Builds the cost function and envelope from the configured Young
/// function and level constants.
fn envelope_from(cfg: &ExperimentConfig, c_value: f64) -> Result<(HFunction, Envelope)> {
    let phi = cfg.orlicz_base()?;
    let h = modification(&phi)?;
    let t_star = match cfg.params.t_star {
        Some(t) => t,
        None => check_h2(&h).t_witness.ok_or_else(|| {
            Error::InvalidParameter(
                "no exponent witness for the cost function; set params.t_star".into(),
            )
        })?,
    };
    let a = cfg.params.envelope_a.unwrap_or(1.0);
    let c1 = cfg.params.c1.unwrap_or(1.0);
    let c2 = cfg.params.c2.unwrap_or(0.1);
    let env = Envelope::new(a, c_value, c1, c2, t_star, &h)?;
    Ok((h, env))
}

fn envelope_summary_table(env: &Envelope) -> Table {
    let mut t = Table::new("envelope", &["quantity", "value"]);
    t.push(vec!["a".into(), fmt_f64(env.a)]);
    t.push(vec!["c".into(), fmt_f64(env.c)]);
    t.push(vec!["c1".into(), fmt_f64(env.c1)]);
    t.push(vec!["c2".into(), fmt_f64(env.c2)]);
    t.push(vec!["t_star".into(), fmt_f64(env.t_star)]);
    t.push(vec!["c_ddot".into(), fmt_f64(env.c_ddot())]);
    t.push(vec!["r_min".into(), fmt_f64(env.r_min())]);
    t.push(vec!["r_audit".into(), fmt_f64(env.r_audit())]);
    t.push(vec!["k_hat".into(), fmt_f64(env.k_hat())]);
    t
}

fn boundary_label(v: f64) -> String {
    fmt_f64(v).replace('-', "m").replace('.', "p")
}

// ---------------------------------------------------------------------
// scenario bodies

fn orlicz_suite(cfg: &ExperimentConfig) -> Result<(Vec<Table>, Vec<Verdict>)> {
    let seed = cfg.sampler.seed;
    let ps = [1.5, 2.0, 3.0, 4.0];
    let ys = linspace(0.1, 10.0, 199);

    let mut duality = Table::new("conjugate_duality", &["p", "q", "max_rel_err"]);
    let mut worst_duality = 0.0f64;
    for &p in &ps {
        let q = p / (p - 1.0);
        let phi = YoungFunction::power(p)?;
        let star = conjugate(&phi)?;
        let mut err = 0.0f64;
        for &y in &ys {
            let exact = y.powf(q) / q;
            err = err.max((star.eval(y) - exact).abs() / exact.max(1e-12));
        }
        worst_duality = worst_duality.max(err);
        duality.push(vec![fmt_f64(p), fmt_f64(q), fmt_f64(err)]);
    }

    // second conjugation must return to the original, up to grid resolution
    let mut bidual = Table::new("biconjugate", &["p", "max_rel_err", "tolerance"]);
    let mut bidual_ok = true;
    for &p in &ps {
        let phi = YoungFunction::power(p)?;
        let back = conjugate(&conjugate(&phi)?)?;
        let mut err = 0.0f64;
        for &x in &ys {
            let exact = phi.eval(x);
            err = err.max((back.eval(x) - exact).abs() / exact.max(1e-12));
        }
        let tol = 10.0 * grid_resolution();
        bidual_ok &= err <= tol;
        bidual.push(vec![fmt_f64(p), fmt_f64(err), fmt_f64(tol)]);
    }

    let mut young = Table::new(
        "young_slack",
        &["p", "min_slack", "touch_slack", "premise", "scaling"],
    );
    let mut young_ok = true;
    for (i, &p) in ps.iter().enumerate() {
        let phi = YoungFunction::power(p)?;
        let rep = check_young_lemmas(&phi, p, 10_000, seed + i as u64)?;
        young_ok &= rep.young_min_slack >= -1e-9 && rep.premise_holds;
        young.push(vec![
            fmt_f64(p),
            fmt_f64(rep.young_min_slack),
            fmt_f64(rep.touch_slack),
            rep.premise_holds.to_string(),
            rep.scaling_ok.map_or("-".into(), |b| b.to_string()),
        ]);
    }

    let mut herbst = Table::new("herbst_bound", &["p", "lambda", "value", "bound", "ok"]);
    let mut herbst_ok = true;
    for &p in &[2.0, 2.5, 4.0] {
        let h = modification(&YoungFunction::power(p)?)?;
        for k in 0..32 {
            let lambda = 2f64.powf(-4.0 + 7.0 * k as f64 / 31.0);
            let chk = herbst_integral(&h, lambda)?;
            herbst_ok &= chk.ok;
            herbst.push(vec![
                fmt_f64(p),
                fmt_f64(lambda),
                fmt_f64(chk.value),
                fmt_f64(chk.bound),
                chk.ok.to_string(),
            ]);
        }
    }

    let verdicts = vec![
        Verdict::new(
            "1.conjugate",
            worst_duality <= 1e-4,
            format!("max relative error {}", fmt_f64(worst_duality)),
        ),
        Verdict::new("1.biconjugate", bidual_ok, "double conjugation returns the original".into()),
        Verdict::new("1.young", young_ok, "pair inequality slack nonnegative".into()),
        Verdict::new("1.herbst", herbst_ok, "integral bound holds on the lambda grid".into()),
    ];
    Ok((vec![duality, bidual, young, herbst], verdicts))
}

/// Relative spacing of the tabulation grid used by conjugation.
fn grid_resolution() -> f64 {
    let g = crate::orlicz::default_grid();
    let mut worst = 0.0f64;
    for w in g.windows(2) {
        if w[0] >= 0.1 && w[1] <= 10.0 {
            worst = worst.max((w[1] - w[0]) / w[0]);
        }
    }
    worst
}

fn one_site_constants(cfg: &ExperimentConfig) -> Result<(Vec<Table>, Vec<Verdict>)> {
    let grid = cfg.grid;
    let fill = cfg.params.boundary.unwrap_or(0.0);
    let boundary = Boundary::constant(fill);
    let site = origin(cfg.model.d);
    let m = OneSiteMeasure::conditional(&cfg.model, &site, &boundary, grid)?;

    let gap = spectral_gap(&m);
    let sg = scan_probes(&m, RatioKind::SpectralGap, |x| x * x)?;
    let ls = scan_probes(&m, RatioKind::LogSobolev, |x| x * x)?;
    let (margin_ok, margin) = check_mls_implies_sg(ls.sup_ratio, sg.sup_ratio, 0.02);

    let mut table = Table::new("constants", &["quantity", "value", "argmax"]);
    table.push(vec!["gap".into(), fmt_f64(gap.gap), "-".into()]);
    table.push(vec!["gap_coarse".into(), fmt_f64(gap.coarse_gap), "-".into()]);
    table.push(vec![
        "sg2_sup".into(),
        fmt_f64(sg.sup_ratio),
        format!("{}@{}", sg.argmax.0, fmt_f64(sg.argmax.1)),
    ]);
    table.push(vec![
        "ls2_sup".into(),
        fmt_f64(ls.sup_ratio),
        format!("{}@{}", ls.argmax.0, fmt_f64(ls.argmax.1)),
    ]);
    table.push(vec!["half_ls_margin".into(), fmt_f64(margin), "-".into()]);

    // boundary sweep of the same estimates
    let omegas = cfg.params.omega_grid.clone().unwrap_or_else(|| linspace(-2.0, 2.0, 9));
    let mut sweep = Table::new("boundary_sweep", &["kind", "omega", "sup", "argmax"]);
    let mut uniform_finite = true;
    for kind in [RatioKind::SpectralGap, RatioKind::LogSobolev] {
        let est = estimate_constant(&cfg.model, &site, &omegas, kind, |x| x * x, grid)?;
        uniform_finite &= est.uniform_sup.is_finite();
        for (omega, sup, argmax) in &est.per_omega {
            sweep.push(vec![
                kind.label().into(),
                fmt_f64(*omega),
                fmt_f64(*sup),
                argmax.clone(),
            ]);
        }
    }

    let verdicts = vec![
        Verdict::new(
            "2.gap",
            (gap.gap - 1.0).abs() <= 0.002 && gap.converged,
            format!("gap {}", fmt_f64(gap.gap)),
        ),
        Verdict::new(
            "2.ls2",
            ls.sup_ratio >= 1.90 && ls.sup_ratio <= 2.01,
            format!("probe sup {}", fmt_f64(ls.sup_ratio)),
        ),
        Verdict::new(
            "2.half-ls",
            margin_ok,
            format!("margin {}", fmt_f64(margin)),
        ),
        Verdict::new(
            "2.uniform",
            uniform_finite,
            "boundary-uniform suprema finite".into(),
        ),
    ];
    Ok((vec![table, sweep], verdicts))
}

fn tensorisation(cfg: &ExperimentConfig) -> Result<(Vec<Table>, Vec<Verdict>)> {
    let grid = cfg.grid;
    let fill = cfg.params.boundary.unwrap_or(0.0);
    let site = origin(cfg.model.d);
    let m = OneSiteMeasure::conditional(&cfg.model, &site, &Boundary::constant(fill), grid)?;

    let single = scan_probes(&m, RatioKind::LogSobolev, |x| x * x)?;

    // factorized probes over the same tilt family on both coordinates
    let nodes = m.grid.nodes();
    let mut parts: Vec<(String, Vec<f64>)> = Vec::new();
    for (name, g) in probe_family() {
        for theta in tilt_grid() {
            let f: Vec<f64> = nodes.iter().map(|&x| (0.5 * theta * g(x)).exp()).collect();
            parts.push((format!("{name}@{}", fmt_f64(theta)), f));
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_pair = (String::new(), String::new());
    let mut informative = 0usize;
    for (ni, fi) in &parts {
        for (nj, fj) in &parts {
            let probe = FactoredProbe {
                parts: vec![fi.clone(), fj.clone()],
            };
            if let Some(r) = product_ls_ratio(&[&m, &m], &probe) {
                informative += 1;
                if r > best {
                    best = r;
                    best_pair = (ni.clone(), nj.clone());
                }
            }
        }
    }

    let mut table = Table::new("tensorisation", &["quantity", "value"]);
    table.push(vec!["single_sup".into(), fmt_f64(single.sup_ratio)]);
    table.push(vec!["product_sup".into(), fmt_f64(best)]);
    table.push(vec!["product_argmax".into(), format!("{}x{}", best_pair.0, best_pair.1)]);
    table.push(vec!["informative_pairs".into(), informative.to_string()]);

    let verdicts = vec![
        Verdict::new(
            "3.lower",
            best >= single.sup_ratio - 1e-6,
            format!(
                "product {} vs single {}",
                fmt_f64(best),
                fmt_f64(single.sup_ratio)
            ),
        ),
        Verdict::new(
            "3.upper",
            best <= single.sup_ratio * 1.05,
            format!("product within 5 percent of single {}", fmt_f64(best)),
        ),
    ];
    Ok((vec![table], verdicts))
}

fn sweep_convergence(cfg: &ExperimentConfig) -> Result<(Vec<Table>, Vec<Verdict>)> {
    let model = &cfg.model;
    let radius = cfg.params.box_radius.unwrap_or(3);
    let grid = cfg.grid;
    let s = cfg.params.start_shell.unwrap_or(0);
    let n = s + cfg.params.sweep_steps.unwrap_or(14);
    let site = origin(model.d);
    let f = GriddedFunction::from_fn(vec![site.clone()], grid, |c| c[0])?;

    let primary_fill = cfg.params.boundary.unwrap_or(0.0);
    let extra = cfg.params.boundaries.clone().unwrap_or_else(|| vec![2.0, -2.0]);
    let mut fills = vec![primary_fill];
    fills.extend(extra.iter().cloned());

    let mut tables = Vec::new();
    let mut results = Vec::new();
    let exactable = model.phase == Phase::Gaussian && model.potential == Potential::Bilinear;
    for (i, &fill) in fills.iter().enumerate() {
        let boundary = Boundary::constant(fill);
        let trace = apply_sweep(&f, n, s, model, &boundary, radius)?;
        let idx_site = site.clone();
        let mu = estimate_mu(
            model,
            radius,
            &boundary,
            grid,
            cfg.sampler.burn_in,
            cfg.sampler.samples,
            cfg.sampler.seed + i as u64,
            |sites, state| {
                let k = sites.binary_search(&idx_site).expect("origin in box");
                state[k]
            },
        )?;
        let diag = convergence_diagnostic(&trace, &mu)?;
        let exact = if exactable {
            Some(GaussianExact::new(model, radius, &boundary)?.mean_at(&site)?)
        } else {
            None
        };

        let mut t = Table::new(
            &format!("trace_b{}", boundary_label(fill)),
            &["k", "deviation", "support_size"],
        );
        for (step, dev) in trace.steps.iter().zip(diag.deviations.iter()) {
            t.push(vec![
                step.shell.to_string(),
                fmt_f64(*dev),
                step.support_size.to_string(),
            ]);
        }
        tables.push(t);
        results.push((fill, trace, mu, diag, exact));
    }

    let (_, ref trace0, ref mu0, ref diag0, exact0) = results[0];
    let rate_pass = match diag0.rate {
        RateFit::Geometric(rho) => rho < 0.5,
        RateFit::BelowFloor => true,
    };
    // a trace pinned at the numerical floor from the start (symmetric or
    // decoupled setups) has nothing left to decrease
    let decreasing_pass = matches!(diag0.decreasing_from, Some(k) if k <= s + 2)
        || matches!(diag0.rate, RateFit::BelowFloor);
    let exact_pass = exact0.map_or(!exactable, |e| {
        (trace0.final_value() - e).abs() <= 3.0 * mu0.stderr.max(1e-12)
    });

    let mut verdicts = vec![
        Verdict::new(
            "4.decreasing",
            decreasing_pass,
            format!("strictly decreasing from shell {:?}", diag0.decreasing_from),
        ),
        Verdict::new(
            "4.rate",
            rate_pass,
            match diag0.rate {
                RateFit::Geometric(rho) => format!("fitted rate {}", fmt_f64(rho)),
                RateFit::BelowFloor => "deviations at the numerical floor".into(),
            },
        ),
        Verdict::new(
            "4.limit-mcmc",
            diag0.limit_ok,
            format!(
                "gap {} vs stderr {}",
                fmt_f64(diag0.final_gap),
                fmt_f64(mu0.stderr)
            ),
        ),
        Verdict::new(
            "4.limit-exact",
            exact_pass,
            match exact0 {
                Some(e) => format!(
                    "sweep {} vs solve {}",
                    fmt_f64(trace0.final_value()),
                    fmt_f64(e)
                ),
                None => "no closed-form solve for this model".into(),
            },
        ),
    ];

    if results.len() >= 3 {
        let (_, ref ta, ref ma, _, _) = results[1];
        let (_, ref tb, ref mb, _, _) = results[2];
        let gap = (ta.final_value() - tb.final_value()).abs();
        let tol = 3.0 * ma.stderr.hypot(mb.stderr).max(1e-12);
        verdicts.push(Verdict::new(
            "4.uniqueness",
            gap <= tol,
            format!("opposite-boundary limit gap {} vs {}", fmt_f64(gap), fmt_f64(tol)),
        ));
    }

    let mut summary = Table::new(
        "sweep_summary",
        &["boundary", "limit", "mcmc_mean", "mcmc_stderr", "exact"],
    );
    for (fill, trace, mu, _, exact) in &results {
        summary.push(vec![
            fmt_f64(*fill),
            fmt_f64(trace.final_value()),
            fmt_f64(mu.mean),
            fmt_f64(mu.stderr),
            exact.map_or("-".into(), fmt_f64),
        ]);
    }
    tables.push(summary);
    Ok((tables, verdicts))
}

fn gradient_sweep(cfg: &ExperimentConfig) -> Result<(Vec<Table>, Vec<Verdict>)> {
    let grid = cfg.grid;
    let site = origin(cfg.model.d);
    let f = GriddedFunction::from_fn(vec![site], grid, |c| c[0].tanh())?;
    let k = cfg.params.shell.unwrap_or(0);
    let count = cfg.params.boundary_count.unwrap_or(100);
    let js = cfg
        .params
        .j_values
        .clone()
        .unwrap_or_else(|| vec![0.025, 0.05, 0.1]);

    let mut table = Table::new("eta", &["j0", "eta", "samples"]);
    let mut etas = Vec::new();
    for (i, &j0) in js.iter().enumerate() {
        let model = SpinModel {
            j: j0,
            j0,
            ..cfg.model.clone()
        };
        let rep = check_gradient_sweep(&model, &f, k, count, cfg.sampler.seed + i as u64)?;
        table.push(vec![
            fmt_f64(j0),
            fmt_f64(rep.eta_min),
            rep.samples.to_string(),
        ]);
        etas.push((j0, rep.eta_min));
    }

    let at_half = etas
        .iter()
        .find(|(j, _)| (*j - 0.05).abs() < 1e-12)
        .map(|&(_, e)| e);
    let mut law_ok = true;
    let mut law_detail = Vec::new();
    for w in etas.windows(2) {
        let (ja, ea) = w[0];
        let (jb, eb) = w[1];
        if ea <= 0.0 {
            law_ok = false;
            continue;
        }
        let measured = eb / ea;
        let law = (jb / ja).powi(2);
        let ratio = measured / law;
        law_ok &= ratio >= 0.5 && ratio <= 2.0;
        law_detail.push(format!(
            "{}to{}:{}",
            fmt_f64(ja),
            fmt_f64(jb),
            fmt_f64(ratio)
        ));
    }

    let verdicts = vec![
        Verdict::new(
            "5.eta",
            at_half.is_some_and(|e| e < 1.0),
            format!("eta at 0.05 = {:?}", at_half.map(fmt_f64)),
        ),
        Verdict::new(
            "5.square-law",
            law_ok,
            format!("measured/law ratios {}", law_detail.join(" ")),
        ),
    ];
    Ok((vec![table], verdicts))
}

fn entropy_decay(cfg: &ExperimentConfig) -> Result<(Vec<Table>, Vec<Verdict>)> {
    let grid = cfg.grid;
    let radius = cfg.params.box_radius.unwrap_or(2);
    let site = origin(cfg.model.d);
    let f = GriddedFunction::from_fn(vec![site], grid, |c| c[0].tanh())?;
    let h = modification(&cfg.orlicz_base()?)?;
    let c_scale = cfg.params.c_scale.unwrap_or(2.0);
    let s = cfg.params.start_shell.unwrap_or(0);
    let k_max = cfg.params.k_max.unwrap_or(6);
    let lambdas = cfg
        .params
        .lambda_grid
        .clone()
        .unwrap_or_else(|| vec![0.5, 1.0]);
    let boundary = Boundary::constant(cfg.params.boundary.unwrap_or(0.0));

    let coupled = check_entropy_decay(
        &cfg.model,
        &f,
        &h,
        c_scale,
        s,
        k_max,
        &lambdas,
        radius,
        &boundary,
        cfg.sampler.burn_in,
        cfg.sampler.samples,
        cfg.sampler.seed,
    )?;
    let null_model = SpinModel {
        j: 0.0,
        ..cfg.model.clone()
    };
    let null = check_entropy_decay(
        &null_model,
        &f,
        &h,
        c_scale,
        s,
        k_max,
        &lambdas,
        radius,
        &boundary,
        cfg.sampler.burn_in,
        cfg.sampler.samples,
        cfg.sampler.seed + 1,
    )?;

    let mut rows = Table::new("decay", &["coupling", "lambda", "shell", "mean", "stderr"]);
    for (tag, rep) in [("j", &coupled), ("null", &null)] {
        for lam in &rep.per_lambda {
            for row in &lam.rows {
                rows.push(vec![
                    tag.to_string(),
                    fmt_f64(lam.lambda),
                    row.shell.to_string(),
                    fmt_f64(row.mean),
                    fmt_f64(row.stderr),
                ]);
            }
        }
    }
    let mut fit = Table::new(
        "decay_fit",
        &["lambda", "bound_scale", "rate", "c1_emp", "grad_budget"],
    );
    for lam in &coupled.per_lambda {
        fit.push(vec![
            fmt_f64(lam.lambda),
            fmt_f64(lam.bound_scale),
            lam.rate.map_or("-".into(), fmt_f64),
            lam.c1_emp.map_or("-".into(), fmt_f64),
            fmt_f64(coupled.grad_budget),
        ]);
    }

    let mut monotone = true;
    let mut rate_ok = true;
    for lam in &coupled.per_lambda {
        for w in lam.rows.windows(2) {
            monotone &= w[1].mean <= w[0].mean + 3.0 * (w[0].stderr + w[1].stderr) + 1e-12;
        }
        rate_ok &= lam.rate.is_some_and(|r| r < 1.0);
    }
    let mut null_ok = true;
    for lam in &null.per_lambda {
        for row in &lam.rows {
            null_ok &= row.mean.abs() <= 3.0 * row.stderr + 1e-12;
        }
    }

    let verdicts = vec![
        Verdict::new("6.monotone", monotone, "per-shell terms nonincreasing".into()),
        Verdict::new("6.rate", rate_ok, "fitted ratio below one".into()),
        Verdict::new(
            "6.null",
            null_ok,
            "decoupled terms vanish within noise".into(),
        ),
    ];
    Ok((vec![rows, fit], verdicts))
}

fn tail_csv(name: &str, verdict: &crate::concentration::DominanceReport, tail: &crate::concentration::TailReport) -> Table {
    let mut t = Table::new(
        name,
        &["r", "empirical", "upper_ci", "envelope", "valid", "verdict"],
    );
    for (row, dom) in tail.rows.iter().zip(verdict.rows.iter()) {
        t.push(vec![
            fmt_f64(row.r),
            fmt_f64(row.empirical),
            fmt_f64(row.upper_ci),
            fmt_f64(dom.envelope),
            dom.valid.to_string(),
            if dom.dominated { "PASS" } else { "FAIL" }.to_string(),
        ]);
    }
    t
}

fn tail_product(cfg: &ExperimentConfig) -> Result<(Vec<Table>, Vec<Verdict>)> {
    let radius = cfg.params.box_radius.unwrap_or(2);
    let c = cfg.params.envelope_c.unwrap_or(2.0);
    let (_h, env) = envelope_from(cfg, c)?;
    let r_min = env.r_min();
    let mut r_grid = vec![2.0];
    r_grid.extend(
        cfg.params
            .r_grid
            .clone()
            .unwrap_or_else(|| linspace(r_min, r_min + 3.0, 13)),
    );
    let f = observable(
        cfg.params.observable.as_deref().unwrap_or("normalized-sum"),
        cfg.model.d,
        radius,
    )?;
    let boundary = Boundary::constant(cfg.params.boundary.unwrap_or(0.0));
    let tail = empirical_tail(
        &cfg.model,
        radius,
        &boundary,
        f.as_ref(),
        &r_grid,
        cfg.grid,
        cfg.sampler.burn_in,
        cfg.sampler.samples,
        cfg.sampler.seed,
    )?;
    let dom = dominance_check(&tail, &env);

    let oracle = &tail.rows[0];
    let oracle_pass = oracle.upper_ci >= 0.02275 && (oracle.empirical - 0.02275).abs() <= 0.005;
    let n_valid = dom.rows.iter().filter(|r| r.valid).count();

    let verdicts = vec![
        Verdict::new(
            "7.oracle",
            oracle_pass,
            format!(
                "tail at 2 = {} (upper {})",
                fmt_f64(oracle.empirical),
                fmt_f64(oracle.upper_ci)
            ),
        ),
        Verdict::new(
            "7.dominance",
            dom.all_valid_pass && n_valid > 0,
            format!("{n_valid} valid radii, all dominated: {}", dom.all_valid_pass),
        ),
        Verdict::new(
            "7.vacuity",
            !dom.vacuous,
            format!("envelope reaches below one half on the range: {}", !dom.vacuous),
        ),
    ];
    Ok((vec![tail_csv("tail", &dom, &tail), envelope_summary_table(&env)], verdicts))
}

fn tail_gibbs(cfg: &ExperimentConfig) -> Result<(Vec<Table>, Vec<Verdict>)> {
    let radius = cfg.params.box_radius.unwrap_or(3);
    let c = cfg.params.envelope_c.unwrap_or(2.0);
    let (_h, env) = envelope_from(cfg, c)?;
    let r_min = env.r_min();
    let r_grid = cfg
        .params
        .r_grid
        .clone()
        .unwrap_or_else(|| linspace(r_min, r_min + 3.0, 13));
    let f = observable(
        cfg.params.observable.as_deref().unwrap_or("normalized-sum"),
        cfg.model.d,
        radius,
    )?;
    let boundary = Boundary::constant(cfg.params.boundary.unwrap_or(0.0));
    let tail = empirical_tail(
        &cfg.model,
        radius,
        &boundary,
        f.as_ref(),
        &r_grid,
        cfg.grid,
        cfg.sampler.burn_in,
        cfg.sampler.samples,
        cfg.sampler.seed,
    )?;
    let dom = dominance_check(&tail, &env);
    let n_valid = dom.rows.iter().filter(|r| r.valid).count();

    let verdicts = vec![
        Verdict::new(
            "8.dominance",
            dom.all_valid_pass && n_valid > 0,
            format!("{n_valid} valid radii, all dominated: {}", dom.all_valid_pass),
        ),
        Verdict::new(
            "8.vacuity",
            !dom.vacuous,
            format!("envelope informative on the range: {}", !dom.vacuous),
        ),
    ];
    Ok((vec![tail_csv("tail", &dom, &tail), envelope_summary_table(&env)], verdicts))
}

fn gauge_from(cfg: &ExperimentConfig, h: &HFunction) -> Result<Gauge> {
    match cfg.params.gauge.as_deref().unwrap_or("conjugate") {
        "conjugate" => Ok(Gauge::Young(conjugate(h.base())?)),
        "power-4-3" => Ok(Gauge::PowerFourThirds),
        other => Err(Error::InvalidParameter(format!(
            "unknown gauge '{other}'; use conjugate or power-4-3"
        ))),
    }
}

fn enlargement(cfg: &ExperimentConfig) -> Result<(Vec<Table>, Vec<Verdict>)> {
    let radius = cfg.params.box_radius.unwrap_or(3);
    let c = cfg.params.envelope_c.unwrap_or(2.0);
    let (h, env) = envelope_from(cfg, c)?;
    let gauge = gauge_from(cfg, &h)?;
    let k_hat = env.k_hat();
    let r_grid = cfg
        .params
        .r_grid
        .clone()
        .unwrap_or_else(|| linspace(0.25, 12.25, 13));
    let f = observable(
        cfg.params.observable.as_deref().unwrap_or("normalized-sum"),
        cfg.model.d,
        radius,
    )?;
    let boundary = Boundary::constant(cfg.params.boundary.unwrap_or(0.0));
    let rep = enlargement_probability(
        &cfg.model,
        radius,
        &boundary,
        f.as_ref(),
        &gauge,
        k_hat,
        &r_grid,
        cfg.grid,
        cfg.sampler.burn_in,
        cfg.sampler.samples,
        cfg.params.witness_cap.unwrap_or(20_000),
        cfg.sampler.seed,
    )?;

    let mut t = Table::new("enlargement", &["r", "complement", "bound"]);
    let mut under = true;
    for row in &rep.rows {
        under &= row.complement <= row.bound + 1e-12;
        t.push(vec![
            fmt_f64(row.r),
            fmt_f64(row.complement),
            fmt_f64(row.bound),
        ]);
    }
    let verdicts = vec![
        Verdict::new(
            "8.enlargement",
            under,
            format!("complement under exp(-k_hat r), k_hat {}", fmt_f64(k_hat)),
        ),
        Verdict::new(
            "8.base-mass",
            rep.mu_a >= 0.45,
            format!("base set mass {}", fmt_f64(rep.mu_a)),
        ),
    ];
    Ok((vec![t, envelope_summary_table(&env)], verdicts))
}

fn talagrand(cfg: &ExperimentConfig) -> Result<(Vec<Table>, Vec<Verdict>)> {
    let radius = cfg.params.box_radius.unwrap_or(3);
    let c = cfg.params.envelope_c.unwrap_or(2.0);
    let (h, env) = envelope_from(cfg, c)?;
    let conj = conjugate(h.base())?;
    let k_hat = env.k_hat();
    let r_grid = cfg
        .params
        .r_grid
        .clone()
        .unwrap_or_else(|| linspace(0.25, 12.25, 7));
    let f = observable(
        cfg.params.observable.as_deref().unwrap_or("normalized-sum"),
        cfg.model.d,
        radius,
    )?;
    let boundary = Boundary::constant(cfg.params.boundary.unwrap_or(0.0));
    let rep = talagrand_check(
        &cfg.model,
        radius,
        &boundary,
        f.as_ref(),
        &conj,
        &r_grid,
        cfg.grid,
        cfg.sampler.burn_in,
        cfg.sampler.samples,
        cfg.params.witness_cap.unwrap_or(20_000),
        cfg.sampler.seed,
    )?;

    let mut t = Table::new("talagrand", &["r", "member_fraction", "floor"]);
    let mut above = true;
    let mut monotone = true;
    let mut prev = 0.0f64;
    for row in &rep.rows {
        let floor = 1.0 - (-k_hat * row.r).exp();
        above &= row.member_fraction >= floor - 1e-12;
        monotone &= row.member_fraction >= prev - 1e-12;
        prev = row.member_fraction;
        t.push(vec![
            fmt_f64(row.r),
            fmt_f64(row.member_fraction),
            fmt_f64(floor),
        ]);
    }
    let verdicts = vec![
        Verdict::new("8.twoball", above, "membership above the exponential floor".into()),
        Verdict::new("8.twoball-monotone", monotone, "membership nondecreasing in r".into()),
    ];
    Ok((vec![t], verdicts))
}

fn perturbation_s3(cfg: &ExperimentConfig) -> Result<(Vec<Table>, Vec<Verdict>)> {
    let site = origin(cfg.model.d);
    let epsilon = cfg.params.epsilon.unwrap_or(0.05);
    let c = cfg.params.envelope_c.unwrap_or(2.0);
    let c_hat = cfg.params.c_hat.unwrap_or(1.0);
    let omegas = cfg
        .params
        .omega_grid
        .clone()
        .unwrap_or_else(|| linspace(-2.0, 2.0, 9));

    let fine = perturbed_ls_check(&cfg.model, &site, &omegas, epsilon, c, c_hat, cfg.grid)?;
    let alt_grid = Grid1d::new(cfg.grid.lx, cfg.params.alt_grid_n.unwrap_or(321))?;
    let coarse = perturbed_ls_check(&cfg.model, &site, &omegas, epsilon, c, c_hat, alt_grid)?;

    let mut ls = Table::new(
        "perturbed_ls",
        &["grid_n", "omega", "penalty", "sup_ratio", "needed"],
    );
    for (n, rep) in [(cfg.grid.n, &fine), (alt_grid.n, &coarse)] {
        for row in &rep.per_omega {
            ls.push(vec![
                n.to_string(),
                fmt_f64(row.omega),
                fmt_f64(row.penalty),
                fmt_f64(row.sup_ratio),
                fmt_f64(row.needed),
            ]);
        }
    }

    let stable = {
        let hi = fine.r_hat.max(coarse.r_hat);
        hi > 0.0 && (fine.r_hat - coarse.r_hat).abs() <= 0.1 * hi
    };

    let radius = cfg.params.box_radius.unwrap_or(2);
    let boundary = Boundary::constant(cfg.params.boundary.unwrap_or(0.0));
    let moment = check_square_moment(
        &cfg.model,
        &site,
        radius,
        &boundary,
        epsilon,
        c,
        c_hat,
        cfg.grid,
        cfg.sampler.burn_in,
        cfg.sampler.samples,
        cfg.sampler.seed,
    )?;
    let mut mt = Table::new("penalty_moment", &["epsilon", "mean", "stderr", "k_check"]);
    mt.push(vec![
        fmt_f64(moment.epsilon),
        fmt_f64(moment.mu_u2.mean),
        fmt_f64(moment.mu_u2.stderr),
        fmt_f64(moment.k_check),
    ]);

    // feed the measured constant into the envelope, then test the 4/3 gauge
    let (_h, env) = envelope_from(cfg, fine.r_hat.max(1e-6))?;
    let k_hat = env.k_hat();
    let r_grid = cfg
        .params
        .r_grid
        .clone()
        .unwrap_or_else(|| linspace(0.25, 9.25, 10));
    let f = observable(
        cfg.params.observable.as_deref().unwrap_or("normalized-sum"),
        cfg.model.d,
        radius,
    )?;
    let rep = enlargement_probability(
        &cfg.model,
        radius,
        &boundary,
        f.as_ref(),
        &Gauge::PowerFourThirds,
        k_hat,
        &r_grid,
        cfg.grid,
        cfg.sampler.burn_in,
        cfg.sampler.samples,
        cfg.params.witness_cap.unwrap_or(20_000),
        cfg.sampler.seed + 1,
    )?;
    let mut et = Table::new("enlargement", &["r", "complement", "bound"]);
    let mut under = true;
    for row in &rep.rows {
        under &= row.complement <= row.bound + 1e-12;
        et.push(vec![
            fmt_f64(row.r),
            fmt_f64(row.complement),
            fmt_f64(row.bound),
        ]);
    }

    let verdicts = vec![
        Verdict::new(
            "9.finite",
            fine.r_hat.is_finite() && coarse.r_hat.is_finite(),
            format!("constants {} and {}", fmt_f64(fine.r_hat), fmt_f64(coarse.r_hat)),
        ),
        Verdict::new(
            "9.stable",
            stable,
            format!(
                "resolutions {} vs {} within 10 percent",
                fmt_f64(fine.r_hat),
                fmt_f64(coarse.r_hat)
            ),
        ),
        Verdict::new(
            "9.moment",
            moment.k_check.is_finite() && moment.mu_u2.mean.is_finite(),
            format!("penalty second moment {}", fmt_f64(moment.k_check)),
        ),
        Verdict::new(
            "9.enlargement",
            under,
            format!("4/3-gauge complement under the bound, k_hat {}", fmt_f64(k_hat)),
        ),
    ];
    Ok((vec![ls, mt, et, envelope_summary_table(&env)], verdicts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_exactly_the_eleven_names() {
        let names: Vec<&str> = registry().iter().map(|(n, _)| *n).collect();
        assert_eq!(
            names,
            vec![
                "orlicz-suite",
                "one-site-constants",
                "tensorisation",
                "sweep-convergence",
                "gradient-sweep",
                "entropy-decay",
                "tail-product",
                "tail-gibbs",
                "enlargement",
                "talagrand",
                "perturbation-s3",
            ]
        );
    }

    #[test]
    fn unknown_scenario_lists_the_valid_names() {
        let err = lookup("no-such").unwrap_err().to_string();
        assert!(err.contains("orlicz-suite") && err.contains("perturbation-s3"));
    }

    #[test]
    fn observables_resolve_sites() {
        let f = observable("x0", 1, 2).unwrap();
        // 5 sites sorted: -2,-1,0,1,2 so the origin is index 2
        assert_eq!(f(&[1.0, 2.0, 3.0, 4.0, 5.0]), 3.0);
        let g = observable("normalized-sum", 1, 2).unwrap();
        assert!((g(&[1.0; 5]) - 5.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!(observable("bogus", 1, 2).is_err());
    }
}
