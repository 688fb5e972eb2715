use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use segfuse::{iou_report, remap_labels, ClassCatalog, ConfusionMatrix, EvalReport, LabelMap, Remapping};
use serde::{Deserialize, Serialize};

use super::{prepare_out_dir, Failure};
use crate::io::{par_map, write_atomic, write_json};
use crate::manifest::DatasetManifest;

pub const REPORT_JSON: &str = "eval_report.json";
pub const REPORT_TXT: &str = "eval_report.txt";

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub manifest: PathBuf,
    /// Holds `<image_id>.png` per manifest entry.
    pub pred_dir: PathBuf,
    pub out_dir: PathBuf,
    pub catalog: Option<String>,
    pub remap: Option<PathBuf>,
    /// Class names or ids that must end up with a defined IoU.
    pub require: Vec<String>,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub entries: usize,
    pub evaluated: usize,
    /// Entries without a prediction file; excluded from the report.
    pub missing: Vec<String>,
    pub failures: Vec<Failure>,
    /// Required classes whose IoU is undefined.
    pub undefined_required: Vec<String>,
    /// `None` when nothing could be evaluated.
    pub report: Option<EvalReport>,
}

impl EvalSummary {
    pub fn failed(&self) -> bool {
        !self.missing.is_empty() || !self.failures.is_empty() || !self.undefined_required.is_empty()
    }
}

fn resolve_required(names: &[String], catalog: &ClassCatalog) -> Result<Vec<u8>> {
    names
        .iter()
        .map(|n| {
            let id = catalog
                .id_by_name(n)
                .or_else(|| n.parse::<u8>().ok().filter(|&id| catalog.contains(id)));
            id.with_context(|| format!("required class `{n}` is not in catalog `{}`", catalog.name()))
        })
        .collect()
}

/// Accumulates one confusion matrix over every entry with both a prediction
/// and ground truth, then writes `eval_report.json` and `eval_report.txt`.
pub fn run(opts: &EvalOptions) -> Result<EvalSummary> {
    let m = DatasetManifest::load(&opts.manifest)?;
    let catalog = m.catalog(opts.catalog.as_deref())?;
    let required = resolve_required(&opts.require, &catalog)?;
    let remap = match &opts.remap {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Remapping::from_toml_str(&text, &catalog)
                .with_context(|| format!("parsing remap {}", p.display()))?
        }
        None => Remapping::default(),
    };
    if !opts.pred_dir.is_dir() {
        bail!("prediction directory {} does not exist", opts.pred_dir.display());
    }
    prepare_out_dir(&opts.out_dir)?;

    enum Outcome {
        Done(ConfusionMatrix),
        Missing,
        Failed(Failure),
    }
    let results = par_map(opts.jobs, &m.entries, |_, e| {
        let pred_path = opts.pred_dir.join(format!("{}.png", e.image_id));
        if !pred_path.is_file() {
            log::warn!("{}: no prediction at {}", e.image_id, pred_path.display());
            return Outcome::Missing;
        }
        let t = Instant::now();
        let r = (|| {
            let gt = e.load_gt(&m)?;
            let pred =
                LabelMap::load_png(&pred_path).with_context(|| format!("reading {}", pred_path.display()))?;
            let pred = if remap.is_empty() {
                pred
            } else {
                remap_labels(&pred, &remap)
            };
            let mut cm = ConfusionMatrix::zeros(catalog.len());
            cm.accumulate(&pred, &gt, &catalog)?;
            Ok(cm)
        })();
        log::info!("eval {} in {:.1} ms", e.image_id, t.elapsed().as_secs_f64() * 1e3);
        match r {
            Ok(cm) => Outcome::Done(cm),
            Err(err) => Outcome::Failed(Failure::new(&e.image_id, &err)),
        }
    })?;

    let mut total = ConfusionMatrix::zeros(catalog.len());
    let mut evaluated = 0;
    let mut missing = Vec::new();
    let mut failures = Vec::new();
    for (e, r) in m.entries.iter().zip(results) {
        match r {
            Outcome::Done(cm) => {
                total.merge(&cm)?;
                evaluated += 1;
            }
            Outcome::Missing => missing.push(e.image_id.clone()),
            Outcome::Failed(f) => failures.push(f),
        }
    }

    let report = match iou_report(&total, &catalog) {
        Ok(r) => Some(r),
        Err(segfuse::Error::EmptyEvaluation) => None,
        Err(e) => return Err(e.into()),
    };
    let undefined_required = required
        .iter()
        .filter(|&&id| report.as_ref().and_then(|r| r.iou(id)).is_none())
        .map(|&id| catalog.get(id).expect("resolved").name.clone())
        .collect();
    let summary = EvalSummary {
        entries: m.entries.len(),
        evaluated,
        missing,
        failures,
        undefined_required,
        report,
    };
    write_json(&opts.out_dir.join(REPORT_JSON), &summary)?;
    let table = match &summary.report {
        Some(r) => r.to_table(),
        None => "no pixels evaluated\n".to_string(),
    };
    write_atomic(&opts.out_dir.join(REPORT_TXT), table.as_bytes())?;
    Ok(summary)
}
