//! Functions of finitely many spin coordinates, tabulated on a shared
//! per-site grid. The value tensor is row-major over the sorted support.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{neighbors, LatticeRegion, Site};
use crate::measure::Grid1d;
use crate::model::{Boundary, SpinModel};

/// Hard cap on tensor size; exceeding it is an error, never a silent
/// approximation.
pub const TENSOR_BUDGET: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct GriddedFunction {
    support: Vec<Site>,
    grid: Grid1d,
    values: Vec<f64>,
}

fn checked_size(n: usize, k: usize) -> Result<usize> {
    let mut size = 1usize;
    for _ in 0..k {
        size = size.checked_mul(n).unwrap_or(usize::MAX);
        if size > TENSOR_BUDGET {
            return Err(Error::TensorBudget {
                size,
                budget: TENSOR_BUDGET,
            });
        }
    }
    Ok(size)
}

/// Row-major strides for `k` axes of length `n`.
fn strides(n: usize, k: usize) -> Vec<usize> {
    let mut s = vec![1usize; k];
    for a in (0..k.saturating_sub(1)).rev() {
        s[a] = s[a + 1] * n;
    }
    s
}

impl GriddedFunction {
    pub fn constant(grid: Grid1d, c: f64) -> Self {
        GriddedFunction {
            support: Vec::new(),
            grid,
            values: vec![c],
        }
    }

    /// Tabulate `f` over the product grid; arguments arrive in sorted
    /// support order.
    pub fn from_fn(
        support: Vec<Site>,
        grid: Grid1d,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let mut support = support;
        support.sort();
        support.dedup();
        let k = support.len();
        let size = checked_size(grid.n, k)?;
        let mut values = vec![0.0f64; size];
        let mut idx = vec![0usize; k];
        let mut args = vec![grid.node(0); k];
        for v in values.iter_mut() {
            *v = f(&args);
            for a in (0..k).rev() {
                idx[a] += 1;
                if idx[a] < grid.n {
                    args[a] = grid.node(idx[a]);
                    break;
                }
                idx[a] = 0;
                args[a] = grid.node(0);
            }
        }
        Ok(GriddedFunction {
            support,
            grid,
            values,
        })
    }

    pub fn support(&self) -> &[Site] {
        &self.support
    }

    pub fn support_region(&self) -> LatticeRegion {
        LatticeRegion::new(self.support.clone())
    }

    pub fn grid(&self) -> Grid1d {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let lx = self.grid.lx;
        if !(x >= -lx && x <= lx) {
            return Err(Error::InvalidParameter(format!(
                "coordinate {x} outside the grid [-{lx}, {lx}]"
            )));
        }
        let t = (x + lx) / self.grid.spacing();
        let mut i = t.floor() as usize;
        let mut frac = t - i as f64;
        if i >= self.grid.n - 1 {
            i = self.grid.n - 2;
            frac = 1.0;
        }
        Ok((i, frac))
    }

    /// Multilinear interpolation at the assigned coordinates; every support
    /// site must be assigned.
    pub fn eval(&self, assignment: &BTreeMap<Site, f64>) -> Result<f64> {
        let k = self.support.len();
        let mut cells = Vec::with_capacity(k);
        for site in &self.support {
            let x = *assignment
                .get(site)
                .ok_or_else(|| Error::SiteNotInSupport { site: site.clone() })?;
            cells.push(self.locate(x)?);
        }
        let st = strides(self.grid.n, k);
        let mut acc = 0.0f64;
        for corner in 0..(1usize << k) {
            let mut w = 1.0f64;
            let mut off = 0usize;
            for a in 0..k {
                let (i, frac) = cells[a];
                if corner >> a & 1 == 1 {
                    w *= frac;
                    off += (i + 1) * st[a];
                } else {
                    w *= 1.0 - frac;
                    off += i * st[a];
                }
            }
            if w != 0.0 {
                acc += w * self.values[off];
            }
        }
        Ok(acc)
    }

    /// Evaluate with every support coordinate set to the same value.
    pub fn eval_uniform(&self, x: f64) -> Result<f64> {
        let assignment: BTreeMap<Site, f64> =
            self.support.iter().map(|s| (s.clone(), x)).collect();
        self.eval(&assignment)
    }

    /// Apply `op` to every tabulated value.
    pub fn map(&self, op: impl Fn(f64) -> f64) -> GriddedFunction {
        GriddedFunction {
            support: self.support.clone(),
            grid: self.grid,
            values: self.values.iter().map(|&v| op(v)).collect(),
        }
    }

    /// Combine two functions on the same support and grid pointwise.
    pub fn zip_with(
        &self,
        other: &GriddedFunction,
        op: impl Fn(f64, f64) -> f64,
    ) -> Result<GriddedFunction> {
        if self.support != other.support || self.grid != other.grid {
            return Err(Error::InvalidParameter(
                "pointwise combination needs matching supports and grids".into(),
            ));
        }
        Ok(GriddedFunction {
            support: self.support.clone(),
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    /// Central-difference derivative along the axis of `site`; zero function
    /// if the site is not in support.
    pub fn derivative(&self, site: &Site) -> GriddedFunction {
        let axis = match self.support.binary_search(site) {
            Ok(a) => a,
            Err(_) => {
                return GriddedFunction {
                    support: self.support.clone(),
                    grid: self.grid,
                    values: vec![0.0; self.values.len()],
                }
            }
        };
        let k = self.support.len();
        let n = self.grid.n;
        let st = strides(n, k);
        let dx = self.grid.spacing();
        let stride = st[axis];
        let mut out = vec![0.0f64; self.values.len()];
        for (pos, o) in out.iter_mut().enumerate() {
            let i = pos / stride % n;
            *o = if i == 0 {
                (self.values[pos + stride] - self.values[pos]) / dx
            } else if i == n - 1 {
                (self.values[pos] - self.values[pos - stride]) / dx
            } else {
                (self.values[pos + stride] - self.values[pos - stride]) / (2.0 * dx)
            };
        }
        GriddedFunction {
            support: self.support.clone(),
            grid: self.grid,
            values: out,
        }
    }

    /// Conditional expectation over the spin at `site`: the result no longer
    /// depends on it but picks up its neighbours inside `within` as new
    /// coordinates (the conditional weights depend on them). Neighbours
    /// outside `within` are read from the boundary. A site outside the
    /// support integrates trivially.
    pub fn integrate_site(
        &self,
        site: &Site,
        model: &SpinModel,
        boundary: &Boundary,
        within: &LatticeRegion,
    ) -> Result<GriddedFunction> {
        let j_axis = match self.support.binary_search(site) {
            Ok(a) => a,
            Err(_) => return Ok(self.clone()),
        };
        let n = self.grid.n;
        let k_old = self.support.len();

        let mut new_support: Vec<Site> = self
            .support
            .iter()
            .filter(|s| *s != site)
            .cloned()
            .collect();
        // with no interaction the conditional weights are neighbour-free
        let mut fixed_sum: Vec<f64> = Vec::new();
        let mut nbr_axes: Vec<usize> = Vec::new();
        if model.j != 0.0 {
            for nb in neighbors(site) {
                if within.contains(&nb) {
                    if let Err(pos) = new_support.binary_search(&nb) {
                        new_support.insert(pos, nb);
                    }
                } else {
                    fixed_sum.push(boundary.at(&nb));
                }
            }
            for nb in neighbors(site) {
                if within.contains(&nb) {
                    nbr_axes.push(new_support.binary_search(&nb).unwrap());
                }
            }
        }

        let k_new = new_support.len();
        let size_new = checked_size(n, k_new)?;
        let st_old = strides(n, k_old);

        // map old axes (minus the integrated one) to new axes
        let mut old_to_new = Vec::with_capacity(k_old);
        for (a, s) in self.support.iter().enumerate() {
            if a != j_axis {
                old_to_new.push((st_old[a], new_support.binary_search(s).unwrap()));
            }
        }

        let nodes = self.grid.nodes();
        let tw = self.grid.weights();
        let j_stride = st_old[j_axis];

        // normalized quadrature weights for the integrated spin, keyed by
        // the neighbour node indices
        let mut cache: HashMap<u64, Vec<f64>> = HashMap::new();
        let mut out = vec![0.0f64; size_new];
        let mut idx = vec![0usize; k_new];
        for o in out.iter_mut() {
            let mut key = 0u64;
            for &a in &nbr_axes {
                key = key * n as u64 + idx[a] as u64;
            }
            if !cache.contains_key(&key) {
                let mut zs: Vec<f64> = nbr_axes.iter().map(|&a| nodes[idx[a]]).collect();
                zs.extend_from_slice(&fixed_sum);
                let logd: Vec<f64> = nodes
                    .iter()
                    .map(|&x| model.one_site_log_density(x, &zs))
                    .collect();
                let m = logd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let dens: Vec<f64> = logd.iter().map(|l| (l - m).exp()).collect();
                if dens[0].max(dens[n - 1]) > crate::measure::TAIL_RTOL {
                    return Err(Error::TailNotContained {
                        what: format!("conditional weights at {site}"),
                        hint: "enlarge the grid half-width".into(),
                    });
                }
                let mut row: Vec<f64> = dens.iter().zip(&tw).map(|(d, w)| d * w).collect();
                let z: f64 = row.iter().sum();
                for r in row.iter_mut() {
                    *r /= z;
                }
                cache.insert(key, row);
            }
            let row = &cache[&key];
            let mut base = 0usize;
            for &(so, na) in &old_to_new {
                base += idx[na] * so;
            }
            let mut acc = 0.0f64;
            let mut pos = base;
            for &w in row.iter() {
                acc += w * self.values[pos];
                pos += j_stride;
            }
            *o = acc;

            for a in (0..k_new).rev() {
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(GriddedFunction {
            support: new_support,
            grid: self.grid,
            values: out,
        })
    }

    /// Persist to a little-endian binary container.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(b"GFN1")?;
        let d = self.support.first().map_or(0, |s| s.dim()) as u32;
        w.write_all(&d.to_le_bytes())?;
        w.write_all(&(self.support.len() as u32).to_le_bytes())?;
        for s in &self.support {
            for &c in &s.0 {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        w.write_all(&self.grid.lx.to_le_bytes())?;
        w.write_all(&(self.grid.n as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<GriddedFunction> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"GFN1" {
            return Err(Error::InvalidParameter("not a gridded-function file".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let d = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let k = u32::from_le_bytes(b4) as usize;
        let mut support = Vec::with_capacity(k);
        for _ in 0..k {
            let mut coords = Vec::with_capacity(d);
            for _ in 0..d {
                r.read_exact(&mut b4)?;
                coords.push(i32::from_le_bytes(b4));
            }
            support.push(Site(coords));
        }
        r.read_exact(&mut b8)?;
        let lx = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let grid = Grid1d::new(lx, n)?;
        let size = checked_size(n, k)?;
        let mut values = Vec::with_capacity(size);
        for _ in 0..size {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        Ok(GriddedFunction {
            support,
            grid,
            values,
        })
    }
}
