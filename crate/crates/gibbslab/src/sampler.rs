//! Block Gibbs sampling of the finite-volume measure on a centred box.
//!
//! Sites are updated one parity class at a time; within a class the sweep
//! order is lexicographic, so a run is a pure function of the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::lattice::{neighbors, LatticeRegion, Site};
use crate::measure::Grid1d;
use crate::model::{Boundary, Potential, SpinModel};

enum NeighborRef {
    In(usize),
    Out(f64),
}

pub struct BlockGibbs {
    model: SpinModel,
    grid: Grid1d,
    sites: Vec<Site>,
    refs: Vec<Vec<NeighborRef>>,
    even: Vec<usize>,
    odd: Vec<usize>,
    phi: Vec<f64>,
    nodes: Vec<f64>,
    state: Vec<f64>,
    rng: ChaCha8Rng,
}

impl BlockGibbs {
    pub fn new(
        model: &SpinModel,
        box_radius: u32,
        boundary: &Boundary,
        grid: Grid1d,
        seed: u64,
    ) -> Result<Self> {
        model.validate()?;
        let region = LatticeRegion::cube(model.d, box_radius);
        let sites = region.sites().to_vec();
        let refs: Vec<Vec<NeighborRef>> = sites
            .iter()
            .map(|s| {
                neighbors(s)
                    .into_iter()
                    .map(|n| match sites.binary_search(&n) {
                        Ok(i) => NeighborRef::In(i),
                        Err(_) => NeighborRef::Out(boundary.at(&n)),
                    })
                    .collect()
            })
            .collect();
        let even: Vec<usize> = (0..sites.len()).filter(|&i| sites[i].parity() == 0).collect();
        let odd: Vec<usize> = (0..sites.len()).filter(|&i| sites[i].parity() == 1).collect();
        let nodes = grid.nodes();
        let phi: Vec<f64> = nodes.iter().map(|&x| model.phase.eval(x)).collect();
        let state = vec![boundary.fill(); sites.len()];
        Ok(BlockGibbs {
            model: model.clone(),
            grid,
            sites,
            refs,
            even,
            odd,
            phi,
            nodes,
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn site_index(&self, site: &Site) -> Option<usize> {
        self.sites.binary_search(site).ok()
    }

    fn update_site(&mut self, idx: usize) {
        let (mut s1, mut s2, mut count) = (0.0f64, 0.0f64, 0usize);
        for r in &self.refs[idx] {
            let z = match r {
                NeighborRef::In(i) => self.state[*i],
                NeighborRef::Out(v) => *v,
            };
            s1 += z;
            s2 += z * z;
            count += 1;
        }
        let j = self.model.j;
        let pot = self.model.potential;
        let n = self.grid.n;
        let mut w = vec![0.0f64; n];
        let mut m = f64::NEG_INFINITY;
        for k in 0..n {
            let x = self.nodes[k];
            let inter = match pot {
                Potential::Bilinear => x * s1,
                Potential::SquaredDifference => count as f64 * x * x - 2.0 * x * s1 + s2,
            };
            let l = -self.phi[k] - j * inter;
            w[k] = l;
            if l > m {
                m = l;
            }
        }
        let dx = self.grid.spacing();
        // cumulative trapezoid mass of exp(w - m)
        let mut prev = (w[0] - m).exp();
        let mut cum = vec![0.0f64; n];
        for k in 1..n {
            let cur = (w[k] - m).exp();
            cum[k] = cum[k - 1] + 0.5 * (prev + cur) * dx;
            prev = cur;
        }
        let target = self.rng.gen::<f64>() * cum[n - 1];
        let i = cum.partition_point(|&c| c < target).max(1);
        let span = cum[i] - cum[i - 1];
        let t = if span > 0.0 {
            (target - cum[i - 1]) / span
        } else {
            0.0
        };
        self.state[idx] = self.nodes[i - 1] + t * dx;
    }

    /// One full sweep: the even parity class, then the odd one.
    pub fn sweep(&mut self) {
        let even = self.even.clone();
        for idx in even {
            self.update_site(idx);
        }
        let odd = self.odd.clone();
        for idx in odd {
            self.update_site(idx);
        }
    }

    /// Discard `burn_in` sweeps, then call `visit` on the state after each of
    /// the `samples` following sweeps.
    pub fn run(&mut self, burn_in: usize, samples: usize, mut visit: impl FnMut(&[f64])) {
        for _ in 0..burn_in {
            self.sweep();
        }
        for _ in 0..samples {
            self.sweep();
            visit(&self.state);
        }
    }
}

/// Monte Carlo estimate with a batch-means standard error.
#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Batch-means analysis of a stationary series.
pub fn batch_means(values: &[f64], batches: usize) -> McEstimate {
    let n = values.len();
    assert!(batches >= 2 && n >= batches);
    let per = n / batches;
    let used = per * batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| values[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (batches - 1) as f64;
    McEstimate {
        mean,
        stderr: (var / batches as f64).sqrt(),
        n: used,
    }
}

/// Estimate the expectation of `f` under the box measure by block Gibbs.
pub fn estimate_mu(
    model: &SpinModel,
    box_radius: u32,
    boundary: &Boundary,
    grid: Grid1d,
    burn_in: usize,
    samples: usize,
    seed: u64,
    mut f: impl FnMut(&[Site], &[f64]) -> f64,
) -> Result<McEstimate> {
    let mut chain = BlockGibbs::new(model, box_radius, boundary, grid, seed)?;
    let mut values = Vec::with_capacity(samples);
    let sites: Vec<Site> = chain.sites().to_vec();
    chain.run(burn_in, samples, |state| values.push(f(&sites, state)));
    Ok(batch_means(&values, 32.min(samples / 2).max(2)))
}

/// Kolmogorov-Smirnov distance between an empirical sample and a cdf.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let c = cdf(x);
        d = d.max((c - i as f64 / n).abs());
        d = d.max((c - (i as f64 + 1.0) / n).abs());
    }
    d
}
