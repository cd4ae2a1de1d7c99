use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::commands::{Payload, Report};

/// Writes the JSON report to `path` and the command's CSV tables next to
/// it, named `<stem>_<table>.csv`. Returns every path written.
pub fn write_report(report: &Report, path: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let json = serde_json::to_string_pretty(report)?;
    fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    let mut written = vec![path.to_path_buf()];

    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let dir = path.parent().unwrap_or(Path::new(""));
    let sibling = |suffix: &str| dir.join(format!("{stem}_{}.csv", sanitize(suffix)));

    match &report.payload {
        Payload::Probe { results, sweeps } => {
            let p = sibling("summary");
            let mut w = csv::Writer::from_path(&p)?;
            w.write_record(["target", "lambda", "r2_test", "mae_test", "n_train", "n_test", "seed"])?;
            for r in results {
                w.write_record([
                    r.target.clone(),
                    r.lambda_chosen.to_string(),
                    r.r2_test.to_string(),
                    r.mae_test.to_string(),
                    r.n_train.to_string(),
                    r.n_test.to_string(),
                    r.split.seed.to_string(),
                ])?;
            }
            w.flush()?;
            written.push(p);
            for r in results {
                let p = sibling(&format!("{}_predictions", r.target));
                let mut w = csv::Writer::from_path(&p)?;
                w.write_record(["name", "actual", "predicted"])?;
                for ((name, a), pr) in r.test_names.iter().zip(&r.actual).zip(&r.predictions) {
                    w.write_record([name.clone(), a.to_string(), pr.to_string()])?;
                }
                w.flush()?;
                written.push(p);
            }
            if !sweeps.is_empty() {
                let p = sibling("stability");
                let mut w = csv::Writer::from_path(&p)?;
                w.write_record(["target", "seed", "r2_test", "lambda"])?;
                for s in sweeps {
                    for r in &s.results {
                        w.write_record([
                            s.target.clone(),
                            r.split.seed.to_string(),
                            r.r2_test.to_string(),
                            r.lambda_chosen.to_string(),
                        ])?;
                    }
                }
                w.flush()?;
                written.push(p);
            }
        }
        Payload::Scan { scans } => {
            for s in scans {
                let p = sibling(&format!("{}_correlations", s.target));
                let mut w = csv::Writer::from_path(&p)?;
                w.write_record(["rank", "word", "r", "p_value", "n"])?;
                for (i, c) in s.correlations.iter().enumerate() {
                    w.write_record([
                        (i + 1).to_string(),
                        c.word.clone(),
                        c.r.to_string(),
                        c.p_value.to_string(),
                        c.n.to_string(),
                    ])?;
                }
                w.flush()?;
                written.push(p);
            }
        }
        Payload::Composite { composites } => {
            let p = sibling("scores");
            let mut w = csv::Writer::from_path(&p)?;
            w.write_record(["target", "name", "score", "target_value"])?;
            for c in composites {
                for ((name, s), y) in c.names.iter().zip(&c.scores).zip(&c.target_values) {
                    w.write_record([c.target.clone(), name.clone(), s.to_string(), y.to_string()])?;
                }
            }
            w.flush()?;
            written.push(p);
        }
        Payload::Ablate { reports, .. } => {
            let p = sibling("table");
            let mut w = csv::Writer::from_path(&p)?;
            w.write_record([
                "category",
                "dims",
                "target",
                "baseline_r2",
                "ablated_r2",
                "delta_r2",
                "random_mean_delta",
                "random_std_delta",
                "z_score",
                "n_random",
            ])?;
            for rep in reports {
                for t in &rep.targets {
                    w.write_record([
                        rep.category.clone(),
                        rep.dims.to_string(),
                        t.target.clone(),
                        t.baseline_r2.to_string(),
                        t.ablated_r2.to_string(),
                        t.delta_r2.to_string(),
                        t.random_mean_delta.to_string(),
                        t.random_std_delta.to_string(),
                        t.z_score.map(|z| z.to_string()).unwrap_or_default(),
                        t.n_random.to_string(),
                    ])?;
                }
            }
            w.flush()?;
            written.push(p);
        }
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> anyhow::Result<Report> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}
