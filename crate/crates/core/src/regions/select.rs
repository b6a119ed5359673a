use std::collections::HashMap;

use super::map::label_at;
use crate::error::{Error, Result};
use crate::pop::{ParamBox, PopInstance};

/// Resolution of the candidate-box scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxScan {
    /// Label samples per box side.
    pub samples_per_side: usize,
    /// Candidate corners move by this many sample spacings.
    pub stride: usize,
}

impl Default for BoxScan {
    fn default() -> Self {
        BoxScan { samples_per_side: 16, stride: 2 }
    }
}

/// Histogram of active-set labels on the cell-center lattice of `bx`.
pub fn label_histogram(
    pop: &PopInstance,
    bx: &[(f64, f64)],
    samples_per_side: usize,
) -> Result<Vec<(Vec<usize>, f64)>> {
    let pts = super::map::lattice(bx, samples_per_side);
    let total = pts.len() as f64;
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for u in &pts {
        *counts.entry(label_at(pop, u)?).or_default() += 1;
    }
    let mut hist: Vec<(Vec<usize>, f64)> = counts.into_iter().map(|(k, c)| (k, c as f64 / total)).collect();
    hist.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(hist)
}

/// First box of side lengths `box_size` (scanning lower corners in
/// lexicographic order, last coordinate slowest) whose label histogram has
/// exactly `target` labels, each with share at least `fair_share`.
pub fn select_box_with_region_count(
    pop: &PopInstance,
    target: usize,
    box_size: &[f64],
    fair_share: f64,
) -> Result<ParamBox> {
    select_box_with(pop, target, box_size, fair_share, BoxScan::default())
}

pub fn select_box_with(
    pop: &PopInstance,
    target: usize,
    box_size: &[f64],
    fair_share: f64,
    scan: BoxScan,
) -> Result<ParamBox> {
    LabelGrid::new(pop, box_size, scan)?.find(target, fair_share)
}

/// Active-set labels of the whole instance box at the sample spacing of one
/// candidate box, reusable across region targets.
#[derive(Debug, Clone)]
pub struct LabelGrid {
    outer: ParamBox,
    box_size: Vec<f64>,
    scan: BoxScan,
    h: Vec<f64>,
    cells: Vec<usize>,
    grid: Vec<usize>,
    num_labels: usize,
}

impl LabelGrid {
    pub fn new(pop: &PopInstance, box_size: &[f64], scan: BoxScan) -> Result<Self> {
        let q = pop.q();
        let outer = pop.u_box().clone();
        if box_size.len() != q || box_size.iter().zip(&outer).any(|(&s, &(lo, hi))| !(s > 0.0 && s <= hi - lo)) {
            return Err(Error::InvalidInput("box size must be positive and fit inside the instance box".into()));
        }
        if scan.samples_per_side == 0 || scan.stride == 0 {
            return Err(Error::InvalidInput("scan resolution must be positive".into()));
        }
        let s = scan.samples_per_side;
        let h: Vec<f64> = box_size.iter().map(|&b| b / s as f64).collect();
        let cells: Vec<usize> = (0..q).map(|j| ((outer[j].1 - outer[j].0) / h[j] + 1e-9).floor() as usize).collect();
        let total: usize = cells.iter().product();
        let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut grid = Vec::with_capacity(total);
        for flat in 0..total {
            let mut idx = flat;
            let u: Vec<f64> = (0..q)
                .map(|j| {
                    let i = idx % cells[j];
                    idx /= cells[j];
                    outer[j].0 + (i as f64 + 0.5) * h[j]
                })
                .collect();
            let label = label_at(pop, &u)?;
            let next = ids.len();
            grid.push(*ids.entry(label).or_insert(next));
        }
        Ok(LabelGrid { outer, box_size: box_size.to_vec(), scan, h, cells, grid, num_labels: ids.len() })
    }

    /// Distinct labels seen anywhere in the instance box.
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// First candidate box with exactly `target` labels, each holding at
    /// least `fair_share` of it.
    pub fn find(&self, target: usize, fair_share: f64) -> Result<ParamBox> {
        if target == 0 {
            return Err(Error::InvalidInput("target region count must be at least 1".into()));
        }
        if target as f64 * fair_share > 1.0 + 1e-12 {
            return Err(Error::NotFound(format!("{target} labels cannot each hold a share of {fair_share}")));
        }
        let (q, s, cells) = (self.cells.len(), self.scan.samples_per_side, &self.cells);
        let corners: Vec<usize> =
            (0..q).map(|j| if cells[j] >= s { (cells[j] - s) / self.scan.stride + 1 } else { 0 }).collect();
        let num_corners: usize = corners.iter().product();
        let per_box = s.pow(q as u32);
        let mut counts = vec![0usize; self.num_labels];
        for flat in 0..num_corners {
            let mut idx = flat;
            let start: Vec<usize> = (0..q)
                .map(|j| {
                    let i = idx % corners[j];
                    idx /= corners[j];
                    i * self.scan.stride
                })
                .collect();
            counts.iter_mut().for_each(|c| *c = 0);
            for local in 0..per_box {
                let mut li = local;
                let mut gi = 0;
                let mut mult = 1;
                for j in 0..q {
                    let off = li % s;
                    li /= s;
                    gi += (start[j] + off) * mult;
                    mult *= cells[j];
                }
                counts[self.grid[gi]] += 1;
            }
            let present: Vec<usize> = counts.iter().cloned().filter(|&c| c > 0).collect();
            if present.len() == target && present.iter().all(|&c| c as f64 / per_box as f64 >= fair_share) {
                return Ok((0..q)
                    .map(|j| {
                        let lo = self.outer[j].0 + start[j] as f64 * self.h[j];
                        (lo, lo + self.box_size[j])
                    })
                    .collect());
            }
        }
        Err(Error::NotFound(format!("no box of size {:?} holds exactly {target} fair-share regions", self.box_size)))
    }
}
