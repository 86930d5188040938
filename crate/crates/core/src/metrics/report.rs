use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Per-sample metrics; absent values are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sample_id: String,
    pub variant: String,
    pub acceleration: Option<u32>,
    /// `ON`, `OFF` or `DIFF` for spectra; `magnitude`/`phase` for images.
    pub part: Option<String>,
    pub ssim: Option<f64>,
    pub psnr_db: Option<f64>,
    pub nrmse: Option<f64>,
    pub gfc: Option<f64>,
    pub pcc: Option<f64>,
    pub scc: Option<f64>,
}

pub const METRIC_NAMES: [&str; 6] = ["ssim", "psnr_db", "nrmse", "gfc", "pcc", "scc"];

impl MetricsReport {
    pub fn new(sample_id: impl Into<String>, variant: impl Into<String>) -> Self {
        Self {
            sample_id: sample_id.into(),
            variant: variant.into(),
            ..Default::default()
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "ssim" => self.ssim,
            "psnr_db" => self.psnr_db,
            "nrmse" => self.nrmse,
            "gfc" => self.gfc,
            "pcc" => self.pcc,
            "scc" => self.scc,
            _ => None,
        }
    }

    fn group(&self) -> (Option<u32>, Option<String>) {
        (self.acceleration, self.part.clone())
    }
}

pub fn write_reports_csv(path: impl AsRef<Path>, reports: &[MetricsReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in reports {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsReport>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::Format(e.to_string())
    }
}

/// Mean and population standard deviation of one metric over a group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub variant: String,
    pub acceleration: Option<u32>,
    pub part: Option<String>,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

/// Population mean and standard deviation. Sums are shifted by the first
/// value so that constant inputs give exactly zero spread.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let x0 = v.first().copied().unwrap_or(0.0);
    let m = x0 + v.iter().map(|x| x - x0).sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

pub fn aggregate(reports: &[MetricsReport]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, Option<u32>, Option<String>), Vec<&MetricsReport>> = BTreeMap::new();
    for r in reports {
        let (a, p) = r.group();
        groups.entry((r.variant.clone(), a, p)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((variant, acceleration, part), rs) in groups {
        for name in METRIC_NAMES {
            let vals: Vec<f64> = rs.iter().filter_map(|r| r.metric(name)).collect();
            if vals.is_empty() {
                continue;
            }
            let (mean, std) = mean_std(&vals);
            out.push(AggregateRow {
                variant: variant.clone(),
                acceleration,
                part: part.clone(),
                metric: name.to_string(),
                n: vals.len(),
                mean,
                std,
            });
        }
    }
    out
}

/// Significance bins: `ns` (p > 0.05), `*`, `**`, `***`, `****` (p <= 1e-4).
pub fn stars(p: f64) -> &'static str {
    if p <= 1e-4 {
        "****"
    } else if p <= 1e-3 {
        "***"
    } else if p <= 1e-2 {
        "**"
    } else if p <= 0.05 {
        "*"
    } else {
        "ns"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    pub p: f64,
    pub stars: String,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::Pairing(format!("{} vs {} samples", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::UndefinedMetric("paired t-test needs at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let (t, p) = if var == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / (var / n as f64).sqrt();
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map_err(|e| Error::NumericDomain(e.to_string()))?;
        (t, (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
    };
    Ok(PairedTTest {
        n,
        mean_diff: mean,
        t,
        p,
        stars: stars(p).to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub variant_a: String,
    pub variant_b: String,
    pub acceleration: Option<u32>,
    pub part: Option<String>,
    pub metric: String,
    pub test: PairedTTest,
}

/// Pairs samples of two variants by `(sample_id, acceleration, part)` and
/// tests every metric present in both. Samples present for only one variant
/// are reported as a pairing error.
pub fn compare_variants(reports: &[MetricsReport], a: &str, b: &str) -> Result<Vec<Comparison>> {
    type Key = (Option<u32>, Option<String>, String);
    let collect = |v: &str| -> BTreeMap<Key, &MetricsReport> {
        reports
            .iter()
            .filter(|r| r.variant == v)
            .map(|r| ((r.acceleration, r.part.clone(), r.sample_id.clone()), r))
            .collect()
    };
    let (ma, mb) = (collect(a), collect(b));
    let offenders: Vec<String> = ma
        .keys()
        .filter(|k| !mb.contains_key(*k))
        .map(|k| format!("{}:{}", a, k.2))
        .chain(mb.keys().filter(|k| !ma.contains_key(*k)).map(|k| format!("{}:{}", b, k.2)))
        .collect();
    if !offenders.is_empty() {
        return Err(Error::Pairing(format!("unpaired samples: {}", offenders.join(", "))));
    }
    let mut groups: BTreeMap<(Option<u32>, Option<String>), Vec<(&MetricsReport, &MetricsReport)>> = BTreeMap::new();
    for (k, ra) in &ma {
        groups.entry((k.0, k.1.clone())).or_default().push((ra, mb[k]));
    }
    let mut out = Vec::new();
    for ((acceleration, part), pairs) in groups {
        for name in METRIC_NAMES {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pairs
                .iter()
                .filter_map(|(x, y)| Some((x.metric(name)?, y.metric(name)?)))
                .unzip();
            if xs.len() < 2 {
                continue;
            }
            out.push(Comparison {
                variant_a: a.to_string(),
                variant_b: b.to_string(),
                acceleration,
                part: part.clone(),
                metric: name.to_string(),
                test: paired_t_test(&xs, &ys)?,
            });
        }
    }
    Ok(out)
}
