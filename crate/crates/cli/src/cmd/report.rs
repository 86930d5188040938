use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use aftnet::metrics::{aggregate, compare_variants, read_reports_csv, AggregateRow, Comparison, MetricsReport};
use aftnet::{Error, Result};
use clap::Args;

use super::recon::METRICS_FILE;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Run directories containing metrics.csv, or metrics CSV files.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Variant pairs to test, `A:B`; every pair of variants when omitted.
    #[arg(long)]
    compare: Vec<String>,
}

fn load(p: &PathBuf) -> Result<Vec<MetricsReport>> {
    let f = if p.is_dir() { p.join(METRICS_FILE) } else { p.clone() };
    read_reports_csv(&f)
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), |x| x.to_string())
}

fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut s = String::from("variant,acceleration,part,metric,n,mean,std\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.6},{:.6}",
            r.variant,
            fmt_opt(&r.acceleration),
            fmt_opt(&r.part),
            r.metric,
            r.n,
            r.mean,
            r.std
        );
    }
    s
}

fn comparison_csv(rows: &[Comparison]) -> String {
    let mut s = String::from("variant_a,variant_b,acceleration,part,metric,n,mean_diff,t,p,stars\n");
    for c in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.6},{:.6},{:.6e},{}",
            c.variant_a,
            c.variant_b,
            fmt_opt(&c.acceleration),
            fmt_opt(&c.part),
            c.metric,
            c.test.n,
            c.test.mean_diff,
            c.test.t,
            c.test.p,
            c.test.stars
        );
    }
    s
}

pub fn run(a: ReportArgs) -> Result<()> {
    let mut reports = Vec::new();
    for r in &a.runs {
        reports.extend(load(r)?);
    }
    if reports.iter().all(|r| aftnet::metrics::METRIC_NAMES.iter().all(|m| r.metric(m).is_none())) {
        return Err(Error::Config("no metrics found in the given runs".into()));
    }
    let pairs: Vec<(String, String)> = if a.compare.is_empty() {
        let vs: Vec<String> = reports.iter().map(|r| r.variant.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let mut p = Vec::new();
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                p.push((vs[i].clone(), vs[j].clone()));
            }
        }
        p
    } else {
        a.compare
            .iter()
            .map(|s| {
                s.split_once(':')
                    .map(|(x, y)| (x.to_string(), y.to_string()))
                    .ok_or_else(|| Error::Config(format!("--compare {:?} is not A:B", s)))
            })
            .collect::<Result<_>>()?
    };
    let agg = aggregate(&reports);
    let mut comps = Vec::new();
    for (x, y) in &pairs {
        comps.extend(compare_variants(&reports, x, y)?);
    }
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("aggregate.csv"), aggregate_csv(&agg))?;
    fs::write(a.out.join("comparisons.csv"), comparison_csv(&comps))?;
    let groups: Vec<serde_json::Value> = agg
        .iter()
        .map(|r| {
            serde_json::json!({
                "variant": r.variant,
                "acceleration": r.acceleration,
                "part": r.part,
                "metric": r.metric,
                "n": r.n,
                "mean": r.mean,
                "std": r.std,
                "display": format!("{:.4} ± {:.4}", r.mean, r.std),
            })
        })
        .collect();
    let json = serde_json::json!({ "aggregates": groups, "comparisons": comps });
    fs::write(a.out.join("aggregate.json"), serde_json::to_string_pretty(&json)? + "\n")?;
    for r in &agg {
        println!(
            "{:<12} {:>4} {:<10} {:<8} {:.4} ± {:.4} (n={})",
            r.variant,
            fmt_opt(&r.acceleration),
            fmt_opt(&r.part),
            r.metric,
            r.mean,
            r.std,
            r.n
        );
    }
    for c in &comps {
        println!(
            "{} vs {} {} {}: p = {:.3e} {}",
            c.variant_a,
            c.variant_b,
            fmt_opt(&c.part),
            c.metric,
            c.test.p,
            c.test.stars
        );
    }
    Ok(())
}
