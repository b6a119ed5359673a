use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::template::{template_forward_solve_with_duals, Constraints, ObjectiveTemplate};
use super::{box_contains, check_box, ParamBox, PopInstance};
use crate::error::{Error, Result};
use crate::num::format_f64;
use crate::seed;
use crate::solver::Status;

/// Generator of the true decisions.
#[derive(Debug, Clone, Copy)]
pub enum TruthModel<'a> {
    Pop(&'a PopInstance),
    Template { template: &'a ObjectiveTemplate, c: &'a [f64], constraints: &'a Constraints },
}

impl TruthModel<'_> {
    fn label(&self) -> String {
        match self {
            TruthModel::Pop(_) => "pop".into(),
            TruthModel::Template { template, .. } => format!("template:{}", template.name),
        }
    }

    /// True decision and multipliers at `u`.
    pub fn solve(&self, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            TruthModel::Pop(p) => {
                let r = p.forward_solve(u)?;
                if r.status != Status::Optimal {
                    return Err(Error::Infeasible(format!("forward problem is {:?} at u = {u:?}", r.status)));
                }
                Ok((r.x, r.lambda))
            }
            TruthModel::Template { template, c, constraints } => {
                template_forward_solve_with_duals(template, c, constraints, u)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub generator: String,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bx: Option<ParamBox>,
}

/// Observations `(u_k, x_k)`, optionally with the multipliers recorded at
/// generation time.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub u: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub duals: Option<Vec<Vec<f64>>>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn from_pairs(u: Vec<Vec<f64>>, x: Vec<Vec<f64>>, meta: DatasetMeta) -> Result<Self> {
        if u.is_empty() || u.len() != x.len() {
            return Err(Error::Dimension(format!("{} parameter rows and {} decision rows", u.len(), x.len())));
        }
        let (q, n) = (u[0].len(), x[0].len());
        if q == 0 || n == 0 || u.iter().any(|r| r.len() != q) || x.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged or empty observation rows".into()));
        }
        Ok(Dataset { u, x, duals: None, meta })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn q(&self) -> usize {
        self.u[0].len()
    }

    pub fn n(&self) -> usize {
        self.x[0].len()
    }

    /// Observations at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            u: idx.iter().map(|&i| self.u[i].clone()).collect(),
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            duals: self.duals.as_ref().map(|d| idx.iter().map(|&i| d[i].clone()).collect()),
            meta: DatasetMeta { k: idx.len(), ..self.meta.clone() },
        }
    }

    /// Copy with `N(0, sigma²)` added to every decision coordinate. The
    /// recorded duals no longer match and are dropped.
    pub fn with_noise(&self, sigma: f64, seed: u64) -> Result<Dataset> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("noise level {sigma} must be finite and nonnegative")));
        }
        let normal = Normal::new(0.0, sigma).expect("valid standard deviation");
        let mut rng = seed::rng(seed);
        let x = self.x.iter().map(|r| r.iter().map(|&v| v + normal.sample(&mut rng)).collect()).collect();
        Ok(Dataset { u: self.u.clone(), x, duals: None, meta: self.meta.clone() })
    }

    /// Every observation except `k`.
    pub fn without(&self, k: usize) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| i != k).collect();
        self.subset(&idx)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.q()).map(|i| format!("u_{i}")).collect();
        header.extend((1..=self.n()).map(|i| format!("x_{i}")));
        wr.write_record(&header)?;
        for (u, x) in self.u.iter().zip(&self.x) {
            wr.write_record(u.iter().chain(x).map(|&v| format_f64(v)))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Parses the CSV body. The header must read `u_1..u_q,x_1..x_n`.
    pub fn read_csv<R: Read>(r: R, meta: DatasetMeta) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rd.headers()?.clone();
        let q = header.iter().take_while(|h| h.starts_with("u_")).count();
        let n = header.len() - q;
        for (i, h) in header.iter().enumerate() {
            let expect = if i < q { format!("u_{}", i + 1) } else { format!("x_{}", i - q + 1) };
            if h != expect {
                return Err(Error::Parse(format!("column {i} is '{h}', expected '{expect}'")));
            }
        }
        if q == 0 || n == 0 {
            return Err(Error::Parse("header needs at least one u and one x column".into()));
        }
        let mut u = Vec::new();
        let mut x = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != q + n {
                return Err(Error::Parse(format!("row {} has {} fields, expected {}", line + 1, rec.len(), q + n)));
            }
            let mut vals = Vec::with_capacity(q + n);
            for field in rec.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: '{field}' is not a number", line + 1)))?;
                if !v.is_finite() {
                    return Err(Error::Parse(format!("row {}: non-finite value", line + 1)));
                }
                vals.push(v);
            }
            x.push(vals.split_off(q));
            u.push(vals);
        }
        if u.is_empty() {
            return Err(Error::Parse("dataset has no rows".into()));
        }
        let meta = DatasetMeta { k: u.len(), ..meta };
        Dataset::from_pairs(u, x, meta)
    }

    /// Writes `path` and a metadata sidecar next to it (same stem, `.json`).
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(&self.meta)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let side = path.with_extension("json");
        let meta = if side.exists() {
            serde_json::from_str(&std::fs::read_to_string(side)?)?
        } else {
            DatasetMeta { generator: "file".into(), seed: 0, k: 0, bx: None }
        };
        Dataset::read_csv(std::fs::File::open(path)?, meta)
    }
}

/// Samples `K` parameters uniformly over `bx` and records the exact optimum
/// of the truth model at each.
pub fn generate_dataset(model: TruthModel<'_>, bx: &[(f64, f64)], k: usize, seed: u64) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::InvalidInput("K must be at least 1".into()));
    }
    check_box(bx)?;
    if let TruthModel::Pop(p) = model {
        let outer = p.u_box();
        let inside =
            bx.len() == outer.len() && bx.iter().zip(outer).all(|(&(lo, hi), &(olo, ohi))| lo >= olo && hi <= ohi);
        if !inside {
            return Err(Error::InvalidInput("sampling box must lie inside the instance box".into()));
        }
    }
    let mut rng = seed::rng(seed);
    let mut us = Vec::with_capacity(k);
    let mut xs = Vec::with_capacity(k);
    let mut duals = Vec::with_capacity(k);
    for i in 0..k {
        let u: Vec<f64> = bx.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
        debug_assert!(box_contains(bx, &u, 0.0));
        let (x, lambda) = model.solve(&u).map_err(|e| match e {
            Error::Infeasible(msg) => Error::Infeasible(format!("observation {i}: {msg}")),
            other => other,
        })?;
        us.push(u);
        xs.push(x);
        duals.push(lambda);
    }
    let meta = DatasetMeta { generator: model.label(), seed, k, bx: Some(bx.to_vec()) };
    let mut d = Dataset::from_pairs(us, xs, meta)?;
    d.duals = Some(duals);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let meta = DatasetMeta { generator: "t".into(), seed: 3, k: 2, bx: None };
        Dataset::from_pairs(vec![vec![0.5, -1.25], vec![1e-7, 3.0]], vec![vec![0.1], vec![2.0 / 3.0]], meta).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = sample();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("u_1,u_2,x_1\n"));
        let back = Dataset::read_csv(&buf[..], d.meta.clone()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn csv_rejects_bad_header() {
        let meta = DatasetMeta { generator: "t".into(), seed: 0, k: 0, bx: None };
        assert!(Dataset::read_csv("u_1,x_2\n1,2\n".as_bytes(), meta.clone()).is_err());
        assert!(Dataset::read_csv("x_1\n1\n".as_bytes(), meta.clone()).is_err());
        assert!(Dataset::read_csv("u_1,x_1\n1,nan\n".as_bytes(), meta).is_err());
    }

    #[test]
    fn leave_one_out_subset() {
        let d = sample();
        let w = d.without(0);
        assert_eq!(w.len(), 1);
        assert_eq!(w.u[0], vec![1e-7, 3.0]);
    }
}
