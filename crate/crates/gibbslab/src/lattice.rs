//! Integer-lattice geometry: sites, regions, nearest-neighbour structure and
//! the odd/even shell decomposition used by the sweeping operator.
//!
//! Shells start from the origin, `shell(0) = {0}`, and each later shell is
//! the outer boundary of the previous one. Taking the boundary twice walks
//! back over interior sites, so shell k is exactly the set of sites with L1
//! norm at most k and the parity of k. That closed form is what the
//! constructors below enumerate; the iterated definition is kept as a test
//! oracle.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A lattice site, ordered lexicographically by coordinates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i32>);

impl Site {
    pub fn origin(d: usize) -> Self {
        Site(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn l1_norm(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }

    pub fn l1_distance(&self, other: &Site) -> u32 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.abs_diff(*b))
            .sum()
    }

    pub fn linf_norm(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    /// Parity of the L1 distance from the origin; 0 is the even class.
    pub fn parity(&self) -> u8 {
        (self.l1_norm() % 2) as u8
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// The 2d nearest neighbours, in deterministic order: dimension by
/// dimension, minus before plus.
pub fn neighbors(site: &Site) -> Vec<Site> {
    let mut out = Vec::with_capacity(2 * site.dim());
    for axis in 0..site.dim() {
        for step in [-1i32, 1] {
            let mut c = site.0.clone();
            c[axis] += step;
            out.push(Site(c));
        }
    }
    out
}

/// A finite set of sites, stored sorted and deduplicated so that membership
/// is a binary search and serialized form is canonical.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeRegion {
    sites: Vec<Site>,
}

impl LatticeRegion {
    pub fn new(mut sites: Vec<Site>) -> Self {
        sites.sort();
        sites.dedup();
        LatticeRegion { sites }
    }

    pub fn empty() -> Self {
        LatticeRegion { sites: Vec::new() }
    }

    /// Solid cube `[-radius, radius]^d`.
    pub fn cube(d: usize, radius: u32) -> Self {
        let mut sites = Vec::new();
        let mut current = vec![-(radius as i32); d];
        loop {
            sites.push(Site(current.clone()));
            // odometer increment
            let mut axis = d;
            loop {
                if axis == 0 {
                    return LatticeRegion { sites };
                }
                axis -= 1;
                if current[axis] < radius as i32 {
                    current[axis] += 1;
                    for c in current.iter_mut().skip(axis + 1) {
                        *c = -(radius as i32);
                    }
                    break;
                }
            }
        }
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.sites.binary_search(site).is_ok()
    }

    pub fn union(&self, other: &LatticeRegion) -> LatticeRegion {
        let mut sites = self.sites.clone();
        sites.extend_from_slice(&other.sites);
        LatticeRegion::new(sites)
    }

    pub fn difference(&self, other: &LatticeRegion) -> LatticeRegion {
        LatticeRegion {
            sites: self
                .sites
                .iter()
                .filter(|s| !other.contains(s))
                .cloned()
                .collect(),
        }
    }

    pub fn intersection(&self, other: &LatticeRegion) -> LatticeRegion {
        LatticeRegion {
            sites: self
                .sites
                .iter()
                .filter(|s| other.contains(s))
                .cloned()
                .collect(),
        }
    }

    pub fn max_l1_norm(&self) -> u32 {
        self.sites.iter().map(Site::l1_norm).max().unwrap_or(0)
    }
}

/// Sites outside the region with at least one neighbour inside it.
pub fn outer_boundary(region: &LatticeRegion) -> LatticeRegion {
    let mut out = Vec::new();
    for site in region.sites() {
        for n in neighbors(site) {
            if !region.contains(&n) {
                out.push(n);
            }
        }
    }
    LatticeRegion::new(out)
}

/// Shell k around the origin in the full lattice: L1 ball of radius k
/// restricted to the parity of k.
pub fn shell(k: u32, d: usize) -> LatticeRegion {
    let mut sites = Vec::new();
    for site in LatticeRegion::cube(d, k).sites() {
        let n = site.l1_norm();
        if n <= k && n % 2 == k % 2 {
            sites.push(site.clone());
        }
    }
    LatticeRegion { sites }
}

/// Shell k intersected with the cube of the given radius.
pub fn shell_in_box(k: u32, d: usize, box_radius: u32) -> LatticeRegion {
    let mut sites = Vec::new();
    for site in LatticeRegion::cube(d, box_radius).sites() {
        let n = site.l1_norm();
        if n <= k && n % 2 == k % 2 {
            sites.push(site.clone());
        }
    }
    LatticeRegion { sites }
}

/// Even- and odd-parity classes of the cube, in that order. They partition
/// the cube and no edge of the lattice stays inside one class.
pub fn parity_classes(d: usize, box_radius: u32) -> (LatticeRegion, LatticeRegion) {
    let cube = LatticeRegion::cube(d, box_radius);
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for site in cube.sites() {
        if site.parity() == 0 {
            even.push(site.clone());
        } else {
            odd.push(site.clone());
        }
    }
    (LatticeRegion { sites: even }, LatticeRegion { sites: odd })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The defining iteration, kept independent of the closed form above.
    fn shell_by_iteration(k: u32, d: usize) -> LatticeRegion {
        let mut current = LatticeRegion::new(vec![Site::origin(d)]);
        for _ in 0..k {
            current = outer_boundary(&current);
        }
        current
    }

    #[test]
    fn neighbor_count_and_distance() {
        for d in 1..=3 {
            let site = Site::origin(d);
            let ns = neighbors(&site);
            assert_eq!(ns.len(), 2 * d);
            for n in &ns {
                assert_eq!(site.l1_distance(n), 1);
            }
        }
    }

    #[test]
    fn outer_boundary_is_disjoint_and_adjacent() {
        let region = LatticeRegion::cube(2, 1);
        let boundary = outer_boundary(&region);
        for site in boundary.sites() {
            assert!(!region.contains(site));
            assert!(neighbors(site).iter().any(|n| region.contains(n)));
        }
    }

    #[test]
    fn closed_form_matches_iterated_definition() {
        for d in 1..=3 {
            for k in 0..=if d == 3 { 6 } else { 8 } {
                assert_eq!(
                    shell(k, d),
                    shell_by_iteration(k, d),
                    "shell mismatch at d = {d}, k = {k}"
                );
            }
        }
    }

    #[test]
    fn one_dimensional_shells() {
        let s3 = shell(3, 1);
        let expect: Vec<Site> = [-3, -1, 1, 3].iter().map(|&c| Site(vec![c])).collect();
        assert_eq!(s3.sites(), &expect[..]);
        // shell 2 walks back over the origin
        assert!(shell(2, 1).contains(&Site::origin(1)));
    }

    #[test]
    fn shell_sites_are_never_adjacent() {
        for d in 1..=2 {
            for k in 1..=6 {
                let sh = shell(k, d);
                for (i, a) in sh.sites().iter().enumerate() {
                    for b in &sh.sites()[i + 1..] {
                        assert!(a.l1_distance(b) != 1, "adjacent pair in shell {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn shell_size_is_bounded_by_branching() {
        for d in 1..=3usize {
            for k in 0..=8u32 {
                let bound = (2 * d as u128).pow(k);
                assert!((shell(k, d).len() as u128) <= bound);
            }
        }
    }

    #[test]
    fn parity_classes_partition_the_cube() {
        for d in 1..=3 {
            let radius = 2;
            let cube = LatticeRegion::cube(d, radius);
            let (even, odd) = parity_classes(d, radius);
            assert_eq!(even.len() + odd.len(), cube.len());
            assert!(even.intersection(&odd).is_empty());
            assert_eq!(even.union(&odd), cube);
            for site in even.sites() {
                for n in neighbors(site) {
                    assert!(!even.contains(&n), "edge inside the even class");
                }
            }
        }
    }

    #[test]
    fn far_shells_degenerate_to_parity_classes() {
        for d in 1..=2u32 {
            let radius = 2;
            let (even, odd) = parity_classes(d as usize, radius);
            // saturation kicks in once k reaches d * radius
            for k in (d * radius)..(d * radius + 4) {
                let sh = shell_in_box(k, d as usize, radius);
                let expect = if k % 2 == 0 { &even } else { &odd };
                assert_eq!(&sh, expect, "d = {d}, k = {k}");
            }
        }
    }

    #[test]
    fn regions_serialize_as_sorted_coordinate_lists() {
        #[derive(Serialize, Deserialize)]
        struct Wrap {
            region: LatticeRegion,
        }
        let region = LatticeRegion::new(vec![
            Site(vec![1, 0]),
            Site(vec![-1, 0]),
            Site(vec![0, 0]),
        ]);
        let s = toml::to_string(&Wrap {
            region: region.clone(),
        })
        .unwrap();
        assert_eq!(s.trim(), "region = [[-1, 0], [0, 0], [1, 0]]");
        let back: Wrap = toml::from_str(&s).unwrap();
        assert_eq!(back.region, region);
    }
}
