//! One-site conditional measures on a uniform grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{neighbors, Site};
use crate::model::{Boundary, SpinModel};

/// Containment threshold: endpoint density relative to the peak.
pub const TAIL_RTOL: f64 = 1e-12;

/// Uniform grid on `[-lx, lx]` with `n` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid1d {
    pub lx: f64,
    pub n: usize,
}

impl Grid1d {
    pub fn new(lx: f64, n: usize) -> Result<Self> {
        if !(lx > 0.0) || n < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid needs lx > 0 and n >= 3, got lx = {lx}, n = {n}"
            )));
        }
        Ok(Grid1d { lx, n })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.lx / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.lx + self.spacing() * i as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Trapezoid quadrature weights.
    pub fn weights(&self) -> Vec<f64> {
        let dx = self.spacing();
        let mut w = vec![dx; self.n];
        w[0] = 0.5 * dx;
        w[self.n - 1] = 0.5 * dx;
        w
    }

    /// Index of the nearest node.
    pub fn nearest(&self, x: f64) -> usize {
        let t = (x + self.lx) / self.spacing();
        (t.round().max(0.0) as usize).min(self.n - 1)
    }
}

/// Probability measure of a single spin given fixed neighbour values,
/// tabulated as a trapezoid-normalized density on a grid.
#[derive(Clone, Debug)]
pub struct OneSiteMeasure {
    pub grid: Grid1d,
    /// Density at the nodes; trapezoid mass is 1 up to rounding.
    pub density: Vec<f64>,
    /// Cumulative trapezoid mass, rescaled so the last entry is exactly 1.
    cdf: Vec<f64>,
    /// Log of the original normalizing constant before rescaling.
    pub log_z: f64,
}

impl OneSiteMeasure {
    /// Build from log-density values at the grid nodes.
    pub fn from_log_density(grid: Grid1d, log_density: &[f64]) -> Result<Self> {
        assert_eq!(log_density.len(), grid.n);
        let m = log_density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::InvalidParameter(
                "log-density has no finite maximum".into(),
            ));
        }
        let w: Vec<f64> = log_density.iter().map(|l| (l - m).exp()).collect();
        let tw = grid.weights();
        let z: f64 = w.iter().zip(&tw).map(|(a, b)| a * b).sum();
        let density: Vec<f64> = w.iter().map(|v| v / z).collect();

        let peak = density.iter().cloned().fold(0.0f64, f64::max);
        let edge = density[0].max(density[grid.n - 1]);
        if edge > TAIL_RTOL * peak {
            return Err(Error::TailNotContained {
                what: format!(
                    "endpoint density {:.3e} vs peak {:.3e}",
                    edge, peak
                ),
                hint: "enlarge the grid half-width".into(),
            });
        }

        let dx = grid.spacing();
        let mut cdf = vec![0.0; grid.n];
        for i in 1..grid.n {
            cdf[i] = cdf[i - 1] + 0.5 * (density[i - 1] + density[i]) * dx;
        }
        let total = cdf[grid.n - 1];
        for c in cdf.iter_mut() {
            *c /= total;
        }

        Ok(OneSiteMeasure {
            grid,
            density,
            cdf,
            log_z: m + z.ln(),
        })
    }

    /// Conditional law of the spin at `site` when every neighbour takes its
    /// boundary value.
    pub fn conditional(
        model: &SpinModel,
        site: &Site,
        boundary: &Boundary,
        grid: Grid1d,
    ) -> Result<Self> {
        let zs: Vec<f64> = neighbors(site).iter().map(|n| boundary.at(n)).collect();
        let logd: Vec<f64> = (0..grid.n)
            .map(|i| model.one_site_log_density(grid.node(i), &zs))
            .collect();
        Self::from_log_density(grid, &logd)
    }

    /// Deviation of the trapezoid mass from 1.
    pub fn normalization_defect(&self) -> f64 {
        let tw = self.grid.weights();
        let mass: f64 = self.density.iter().zip(&tw).map(|(a, b)| a * b).sum();
        (mass - 1.0).abs()
    }

    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        let tw = self.grid.weights();
        (0..self.grid.n)
            .map(|i| tw[i] * self.density[i] * g(self.grid.node(i)))
            .sum()
    }

    /// Expectation of a function given by its node values.
    pub fn expect_values(&self, values: &[f64]) -> f64 {
        let tw = self.grid.weights();
        (0..self.grid.n)
            .map(|i| tw[i] * self.density[i] * values[i])
            .sum()
    }

    pub fn variance(&self, g: impl Fn(f64) -> f64 + Copy) -> f64 {
        let m = self.expect(g);
        self.expect(|x| {
            let d = g(x) - m;
            d * d
        })
    }

    /// Inverse of the piecewise-linear cdf.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let i = self.cdf.partition_point(|&c| c < u);
        if i == 0 {
            return self.grid.node(0);
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let span = c1 - c0;
        let t = if span > 0.0 { (u - c0) / span } else { 0.0 };
        self.grid.node(i - 1) + t * self.grid.spacing()
    }

    /// Piecewise-linear cdf at an arbitrary point.
    pub fn cdf_at(&self, x: f64) -> f64 {
        if x <= self.grid.node(0) {
            return 0.0;
        }
        if x >= self.grid.node(self.grid.n - 1) {
            return 1.0;
        }
        let t = (x + self.grid.lx) / self.grid.spacing();
        let i = t.floor() as usize;
        let frac = t - i as f64;
        self.cdf[i] + frac * (self.cdf[i + 1] - self.cdf[i])
    }
}
