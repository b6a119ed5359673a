use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::format_sig;

pub const CSV_HEADER: [&str; 8] = ["experiment", "instance", "method", "prior", "K", "regions", "mre", "seconds"];

/// One test-set evaluation of one method on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub instance: usize,
    pub method: String,
    /// Prior or dependence-ladder level; empty where it does not apply.
    pub prior: String,
    pub k: usize,
    pub regions: Option<usize>,
    pub mre: f64,
    pub seconds: f64,
}

impl ResultRow {
    fn sort_key(&self) -> (&str, usize, &str, &str, usize, Option<usize>) {
        (&self.experiment, self.instance, &self.method, &self.prior, self.k, self.regions)
    }
}

/// Mean over instances of one `(experiment, method, prior, K, regions)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMean {
    pub experiment: String,
    pub method: String,
    pub prior: String,
    pub k: usize,
    pub regions: Option<usize>,
    pub mre: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
    /// Cells dropped because a fit or prediction failed.
    pub failures: usize,
}

fn fmt6(v: f64) -> String {
    format_sig(v, 6)
}

impl ResultsTable {
    pub fn merge(&mut self, other: ResultsTable) {
        self.rows.extend(other.rows);
        self.failures += other.failures;
        self.sort();
    }

    /// Orders rows by experiment, instance, method, prior, K and regions.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    }

    pub fn means(&self) -> Vec<CellMean> {
        let mut acc: BTreeMap<(String, String, String, usize, Option<usize>), (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            let e = acc.entry((r.experiment.clone(), r.method.clone(), r.prior.clone(), r.k, r.regions)).or_default();
            e.0 += r.mre;
            e.1 += 1;
        }
        acc.into_iter()
            .map(|((experiment, method, prior, k, regions), (sum, count))| CellMean {
                experiment,
                method,
                prior,
                k,
                regions,
                mre: sum / count as f64,
                count,
            })
            .collect()
    }

    /// Mean MRE of the matching cell.
    pub fn mean(&self, experiment: &str, method: &str, prior: &str, k: usize, regions: Option<usize>) -> Option<f64> {
        self.means()
            .into_iter()
            .find(|c| {
                c.experiment == experiment && c.method == method && c.prior == prior && c.k == k && c.regions == regions
            })
            .map(|c| c.mre)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(CSV_HEADER)?;
        for r in &self.rows {
            wr.write_record([
                r.experiment.clone(),
                r.instance.to_string(),
                r.method.clone(),
                r.prior.clone(),
                r.k.to_string(),
                r.regions.map(|v| v.to_string()).unwrap_or_default(),
                fmt6(r.mre),
                fmt6(r.seconds),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(Error::Parse(format!("results header {header:?} does not match {CSV_HEADER:?}")));
        }
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let num = |s: &str, what: &str| -> Result<f64> {
                let v: f64 = s.parse().map_err(|_| Error::Parse(format!("line {line}: bad {what} '{s}'")))?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Parse(format!("line {line}: {what} must be finite and nonnegative")));
                }
                Ok(v)
            };
            let int = |s: &str, what: &str| -> Result<usize> {
                s.parse().map_err(|_| Error::Parse(format!("line {line}: bad {what} '{s}'")))
            };
            rows.push(ResultRow {
                experiment: rec[0].to_string(),
                instance: int(&rec[1], "instance")?,
                method: rec[2].to_string(),
                prior: rec[3].to_string(),
                k: int(&rec[4], "K")?,
                regions: if rec[5].is_empty() { None } else { Some(int(&rec[5], "regions")?) },
                mre: num(&rec[6], "mre")?,
                seconds: num(&rec[7], "seconds")?,
            });
        }
        Ok(ResultsTable { rows, failures: 0 })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
