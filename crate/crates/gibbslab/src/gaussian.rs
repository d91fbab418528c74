//! Closed-form finite-volume law for the Gaussian phase with bilinear
//! interaction: a multivariate normal whose precision matrix carries the
//! coupling on nearest-neighbour edges.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{neighbors, LatticeRegion, Site};
use crate::model::{Boundary, Phase, Potential, SpinModel};

pub struct GaussianExact {
    sites: Vec<Site>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol_cov: Cholesky<f64, Dyn>,
}

impl GaussianExact {
    pub fn new(model: &SpinModel, box_radius: u32, boundary: &Boundary) -> Result<Self> {
        model.validate()?;
        if model.phase != Phase::Gaussian || model.potential != Potential::Bilinear {
            return Err(Error::InvalidParameter(
                "closed-form solve needs the Gaussian phase with bilinear interaction".into(),
            ));
        }
        let region = LatticeRegion::cube(model.d, box_radius);
        let sites = region.sites().to_vec();
        let n = sites.len();
        let mut a = DMatrix::<f64>::identity(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for (i, site) in sites.iter().enumerate() {
            for nb in neighbors(site) {
                match sites.binary_search(&nb) {
                    Ok(k) => a[(i, k)] = model.j,
                    Err(_) => b[i] += model.j * boundary.at(&nb),
                }
            }
        }
        let chol_a = Cholesky::new(a).ok_or_else(|| {
            Error::InvalidParameter("precision matrix is not positive definite".into())
        })?;
        let mean = -chol_a.solve(&b);
        let cov = chol_a.inverse();
        let chol_cov = Cholesky::new(cov.clone()).ok_or_else(|| {
            Error::InvalidParameter("covariance is not positive definite".into())
        })?;
        Ok(GaussianExact {
            sites,
            mean,
            cov,
            chol_cov,
        })
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    fn index(&self, site: &Site) -> Result<usize> {
        self.sites
            .binary_search(site)
            .map_err(|_| Error::SiteNotInSupport { site: site.clone() })
    }

    pub fn mean_at(&self, site: &Site) -> Result<f64> {
        Ok(self.mean[self.index(site)?])
    }

    pub fn cov_at(&self, a: &Site, b: &Site) -> Result<f64> {
        Ok(self.cov[(self.index(a)?, self.index(b)?)])
    }

    pub fn mean_vector(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// One exact draw, ordered like `sites()`.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = self.sites.len();
        let z = DVector::from_fn(n, |_, _| standard_normal(rng));
        let x = &self.mean + self.chol_cov.l() * z;
        x.iter().cloned().collect()
    }
}

/// Box-Muller standard normal draw.
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
