use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::region::{region_from_active_set, CriticalRegion, RawRegion};
use crate::error::{Error, Result};
use crate::pop::{check_box, ParamBox, PopInstance};
use crate::seed;
use crate::solver::{SolveResult, Status, ACTIVE_TOL};

/// Containment tolerance of [`locate_region`].
pub const LOCATE_TOL: f64 = 1e-8;
pub const DEFAULT_GRID_DENSITY: usize = 60;
const COVERAGE_SAMPLES: usize = 10_000;
const COVERAGE_SEED: u64 = 0x5eed_c0de;
const MIN_COVERAGE: f64 = 0.99;

/// Active-set label of a forward solution: tight constraints whose
/// multiplier is at least the activity tolerance.
pub fn strong_active_set(res: &SolveResult) -> Vec<usize> {
    res.active_set.iter().cloned().filter(|&i| res.lambda[i] >= ACTIVE_TOL).collect()
}

/// Label of the forward optimum at `u`.
pub fn label_at(pop: &PopInstance, u: &[f64]) -> Result<Vec<usize>> {
    let res = pop.forward_solve(u)?;
    if res.status != Status::Optimal {
        return Err(Error::Infeasible(format!("forward problem is {:?} at u = {u:?}", res.status)));
    }
    Ok(strong_active_set(&res))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub regions: Vec<CriticalRegion>,
    pub bx: ParamBox,
    pub coverage_fraction: f64,
    /// Set when coverage fell below 0.99.
    pub low_coverage: bool,
}

impl RegionMap {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Fraction of `samples` uniform points of the box that fall in some region.
    pub fn coverage(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = seed::rng(seed);
        let hits = (0..samples)
            .filter(|_| {
                let u: Vec<f64> = self.bx.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
                locate_region(self, &u).is_ok()
            })
            .count();
        hits as f64 / samples.max(1) as f64
    }

    pub fn to_json(&self) -> String {
        let raw = RawMap {
            bx: self.bx.iter().map(|&(a, b)| [a, b]).collect(),
            coverage_fraction: self.coverage_fraction,
            regions: self.regions.iter().map(|r| r.to_raw()).collect(),
        };
        serde_json::to_string_pretty(&raw).expect("serializable") + "\n"
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RawMap = serde_json::from_str(s)?;
        let bx: ParamBox = raw.bx.iter().map(|p| (p[0], p[1])).collect();
        check_box(&bx)?;
        if !(0.0..=1.0).contains(&raw.coverage_fraction) {
            return Err(Error::Parse("coverage_fraction must lie in [0, 1]".into()));
        }
        let q = bx.len();
        let regions = raw.regions.into_iter().map(|r| CriticalRegion::from_raw(r, q)).collect::<Result<Vec<_>>>()?;
        let n = regions.first().map(|r| r.g_vec.len());
        if regions.iter().any(|r| Some(r.g_vec.len()) != n) {
            return Err(Error::Dimension("regions disagree on the decision dimension".into()));
        }
        let labels: BTreeSet<&Vec<usize>> = regions.iter().map(|r| &r.active_set).collect();
        if labels.len() != regions.len() {
            return Err(Error::Parse("two regions share an active set".into()));
        }
        Ok(RegionMap {
            regions,
            bx,
            coverage_fraction: raw.coverage_fraction,
            low_coverage: raw.coverage_fraction < MIN_COVERAGE,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct RawMap {
    #[serde(rename = "box")]
    bx: Vec<[f64; 2]>,
    coverage_fraction: f64,
    regions: Vec<RawRegion>,
}

/// Cell centers of a `density^q` lattice over `bx`.
pub(crate) fn lattice(bx: &[(f64, f64)], density: usize) -> Vec<Vec<f64>> {
    let q = bx.len();
    let total = density.pow(q as u32);
    (0..total)
        .map(|mut idx| {
            (0..q)
                .map(|j| {
                    let i = idx % density;
                    idx /= density;
                    let (lo, hi) = bx[j];
                    lo + (i as f64 + 0.5) * (hi - lo) / density as f64
                })
                .collect()
        })
        .collect()
}

/// Collects the active sets seen on a lattice over `bx`, builds their
/// regions and measures coverage on an independent random sample.
///
/// Sample points that no region covers are solved as well and their labels
/// added, so regions thinner than the lattice spacing are not lost.
pub fn enumerate_regions(pop: &PopInstance, bx: &[(f64, f64)], grid_density: usize) -> Result<RegionMap> {
    check_box(bx)?;
    if grid_density == 0 {
        return Err(Error::InvalidInput("grid density must be positive".into()));
    }
    let outer = pop.u_box();
    let inside = bx.len() == outer.len() && bx.iter().zip(outer).all(|(&(lo, hi), &(olo, ohi))| lo >= olo && hi <= ohi);
    if !inside {
        return Err(Error::InvalidInput("enumeration box must lie inside the instance box".into()));
    }
    let local = pop.with_box(bx.to_vec())?;
    let mut labels: BTreeSet<Vec<usize>> = BTreeSet::new();
    for u in lattice(bx, grid_density) {
        labels.insert(label_at(&local, &u)?);
    }
    let mut rejected: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut map = build_map(&local, &labels, &mut rejected)?;

    let mut rng = seed::rng(seed::derive(COVERAGE_SEED, &[1]));
    for _ in 0..COVERAGE_SAMPLES {
        let u: Vec<f64> = bx.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
        if locate_region(&map, &u).is_err() {
            let label = label_at(&local, &u)?;
            if !labels.contains(&label) && !rejected.contains(&label) {
                labels.insert(label);
                map = build_map(&local, &labels, &mut rejected)?;
            }
        }
    }
    map.coverage_fraction = map.coverage(COVERAGE_SAMPLES, seed::derive(COVERAGE_SEED, &[2]));
    map.low_coverage = map.coverage_fraction < MIN_COVERAGE;
    if map.low_coverage {
        log::warn!("critical regions cover only {:.4} of the box", map.coverage_fraction);
    }
    Ok(map)
}

fn build_map(
    pop: &PopInstance,
    labels: &BTreeSet<Vec<usize>>,
    rejected: &mut BTreeSet<Vec<usize>>,
) -> Result<RegionMap> {
    let mut regions = Vec::new();
    for label in labels {
        match region_from_active_set(pop, label) {
            Ok(mut r) => {
                r.remove_redundant_rows()?;
                match r.chebyshev_center() {
                    Ok((_, radius)) if radius > 1e-9 => regions.push(r),
                    _ => {
                        rejected.insert(label.clone());
                    }
                }
            }
            Err(Error::Degenerate(_)) => {
                rejected.insert(label.clone());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RegionMap { regions, bx: pop.u_box().clone(), coverage_fraction: 0.0, low_coverage: true })
}

/// Index of the first region containing `u` within [`LOCATE_TOL`].
pub fn locate_region(map: &RegionMap, u: &[f64]) -> Result<usize> {
    map.regions
        .iter()
        .position(|r| r.contains(u, LOCATE_TOL))
        .ok_or_else(|| Error::NotFound(format!("no critical region contains u = {u:?}")))
}

/// Decision predicted by the affine law of the region containing `u`.
pub fn composite_law(map: &RegionMap, u: &[f64]) -> Result<Vec<f64>> {
    Ok(map.regions[locate_region(map, u)?].x_star(u))
}
