//! Spin models: single-site phases, nearest-neighbour pair potentials,
//! coupling strength and boundary data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{neighbors, LatticeRegion, Site};

/// Single-site potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Phase {
    /// `x^2 / 2`
    Gaussian,
    /// `|x|^p / p`
    Power { p: f64 },
    /// `|x|^p + |x|^{p-1-delta} cos x`, an oscillatory perturbation that is
    /// not convex but still grows like the leading power.
    Perturbed { p: f64, delta: f64 },
}

impl Phase {
    pub fn validate(&self) -> Result<()> {
        match self {
            Phase::Gaussian => Ok(()),
            Phase::Power { p } if *p > 1.0 => Ok(()),
            Phase::Power { p } => Err(Error::InvalidParameter(format!(
                "power phase needs p > 1, got {p}"
            ))),
            Phase::Perturbed { p, delta } if *p > 2.0 && *delta > 0.0 && *delta < 1.0 => Ok(()),
            Phase::Perturbed { p, delta } => Err(Error::InvalidParameter(format!(
                "perturbed phase needs p > 2 and delta in (0,1), got p = {p}, delta = {delta}"
            ))),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Phase::Gaussian => 0.5 * x * x,
            Phase::Power { p } => x.abs().powf(*p) / p,
            Phase::Perturbed { p, delta } => {
                let a = x.abs();
                a.powf(*p) + a.powf(p - 1.0 - delta) * x.cos()
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            Phase::Gaussian => x,
            Phase::Power { p } => x.abs().powf(p - 1.0) * x.signum(),
            Phase::Perturbed { p, delta } => {
                let a = x.abs();
                let s = x.signum();
                p * a.powf(p - 1.0) * s + (p - 1.0 - delta) * a.powf(p - 2.0 - delta) * s * x.cos()
                    - a.powf(p - 1.0 - delta) * x.sin()
            }
        }
    }
}

/// Symmetric pair potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Potential {
    /// `x y`
    Bilinear,
    /// `(x - y)^2`
    SquaredDifference,
}

impl Potential {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Potential::Bilinear => x * y,
            Potential::SquaredDifference => (x - y) * (x - y),
        }
    }

    pub fn dx(&self, x: f64, y: f64) -> f64 {
        match self {
            Potential::Bilinear => y,
            Potential::SquaredDifference => 2.0 * (x - y),
        }
    }

    /// Uniform bound on the mixed second derivative.
    pub fn mixed_partial_bound(&self) -> f64 {
        match self {
            Potential::Bilinear => 1.0,
            Potential::SquaredDifference => 2.0,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        matches!(self, Potential::SquaredDifference)
    }
}

/// A nearest-neighbour model on `Z^d` with uniform coupling `j` bounded by
/// `j0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinModel {
    pub d: usize,
    pub phase: Phase,
    pub potential: Potential,
    pub j: f64,
    pub j0: f64,
}

impl SpinModel {
    pub fn validate(&self) -> Result<()> {
        self.phase.validate()?;
        if self.d == 0 || self.d > 3 {
            return Err(Error::InvalidParameter(format!(
                "dimension must be 1..=3, got {}",
                self.d
            )));
        }
        if !(self.j0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coupling bound must be positive, got j0 = {}",
                self.j0
            )));
        }
        if self.j.abs() > self.j0 * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "|j| = {} exceeds j0 = {}",
                self.j.abs(),
                self.j0
            )));
        }
        Ok(())
    }

    /// Whether the attractive nonnegative-interaction hypotheses hold.
    pub fn is_attractive_nonnegative(&self) -> bool {
        self.j >= 0.0 && self.potential.is_nonnegative()
    }

    /// Conditional log-density (up to the normalizing constant) of one spin
    /// given its neighbour values: `-phase(x) - j * sum_z V(x, z)`.
    pub fn one_site_log_density(&self, x: f64, neighbor_values: &[f64]) -> f64 {
        let mut acc = -self.phase.eval(x);
        for &z in neighbor_values {
            acc -= self.j * self.potential.eval(x, z);
        }
        acc
    }
}

/// Boundary data: explicit values on finitely many sites, a constant fill
/// everywhere else.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Boundary {
    #[serde(default)]
    values: BTreeMap<Site, f64>,
    fill: f64,
}

impl Boundary {
    pub fn constant(fill: f64) -> Self {
        Boundary {
            values: BTreeMap::new(),
            fill,
        }
    }

    pub fn with_values(values: BTreeMap<Site, f64>, fill: f64) -> Self {
        Boundary { values, fill }
    }

    pub fn at(&self, site: &Site) -> f64 {
        self.values.get(site).copied().unwrap_or(self.fill)
    }

    pub fn fill(&self) -> f64 {
        self.fill
    }

    pub fn set(&mut self, site: Site, value: f64) {
        self.values.insert(site, value);
    }
}

/// Energy of a configuration on a region under boundary data. Every ordered
/// pair `(i, j)` with `i` in the region contributes, so an edge interior to
/// the region is counted from both endpoints while an edge leaving it is
/// counted once.
pub fn hamiltonian(
    model: &SpinModel,
    region: &LatticeRegion,
    values: &BTreeMap<Site, f64>,
    boundary: &Boundary,
) -> Result<f64> {
    let mut acc = 0.0;
    for site in region.sites() {
        let x = *values.get(site).ok_or_else(|| {
            Error::InvalidParameter(format!("configuration misses region site {site}"))
        })?;
        acc += model.phase.eval(x);
        for n in neighbors(site) {
            let z = if region.contains(&n) {
                *values.get(&n).ok_or_else(|| {
                    Error::InvalidParameter(format!("configuration misses region site {n}"))
                })?
            } else {
                boundary.at(&n)
            };
            acc += model.j * model.potential.eval(x, z);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gaussian_model(j: f64) -> SpinModel {
        SpinModel {
            d: 1,
            phase: Phase::Gaussian,
            potential: Potential::Bilinear,
            j,
            j0: j.abs().max(0.1),
        }
    }

    #[test]
    fn single_site_energy_with_two_neighbors() {
        let model = gaussian_model(0.1);
        let region = LatticeRegion::new(vec![Site(vec![0])]);
        let mut values = BTreeMap::new();
        values.insert(Site(vec![0]), 1.0);
        let boundary = Boundary::constant(1.0);
        let h = hamiltonian(&model, &region, &values, &boundary).unwrap();
        assert_relative_eq!(h, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn interior_edges_count_from_both_endpoints() {
        let model = gaussian_model(0.1);
        let region = LatticeRegion::new(vec![Site(vec![0]), Site(vec![1])]);
        let mut values = BTreeMap::new();
        values.insert(Site(vec![0]), 1.0);
        values.insert(Site(vec![1]), 2.0);
        let boundary = Boundary::constant(0.0);
        let h = hamiltonian(&model, &region, &values, &boundary).unwrap();
        // phases: 1/2 + 2; interior edge twice: 2 * 0.1 * 2; boundary: 0
        assert_relative_eq!(h, 0.5 + 2.0 + 0.4, epsilon = 1e-12);
    }

    #[test]
    fn perturbed_phase_derivative_matches_finite_differences() {
        let phase = Phase::Perturbed { p: 4.0, delta: 0.5 };
        phase.validate().unwrap();
        for &x in &[0.3f64, 1.1, -2.0, 3.5] {
            let h = 1e-6;
            let fd = (phase.eval(x + h) - phase.eval(x - h)) / (2.0 * h);
            assert_relative_eq!(phase.deriv(x), fd, epsilon = 1e-5, max_relative = 1e-5);
        }
    }

    #[test]
    fn coupling_bound_is_enforced() {
        let mut model = gaussian_model(0.3);
        model.j0 = 0.2;
        assert!(model.validate().is_err());
    }

    #[test]
    fn boundary_lookup_falls_back_to_fill() {
        let mut b = Boundary::constant(2.0);
        b.set(Site(vec![5]), -1.0);
        assert_eq!(b.at(&Site(vec![5])), -1.0);
        assert_eq!(b.at(&Site(vec![6])), 2.0);
    }
}
