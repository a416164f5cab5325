use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context};
use eipl_core::domain::{ResponseRef, SoloLabel};
use eipl_core::grading::{GradingPolicy, GradingRecord};
use eipl_core::jsonl::read_jsonl;
use eipl_core::psychometrics::irt::write_icc_csv;
use eipl_core::psychometrics::report::{OutcomeSummary, ResponseSummary};
use eipl_core::psychometrics::{
    classify_discrimination, cohens_kappa, descriptive_report, fit_2pl, score_matrix, AbilityEstimate,
    FitConfig, FitReport, ItemEstimate, ItemParameters, ScoreMatrix,
};
use serde::{Deserialize, Serialize};

/// What `fit-irt` writes and `bands` / `report --params` read.
#[derive(Debug, Serialize, Deserialize)]
struct FitDocument {
    items: Vec<ItemEstimate>,
    #[serde(default)]
    abilities: Vec<AbilityEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    report: Option<FitReport>,
}

impl FitDocument {
    fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn item_parameters(&self) -> ItemParameters {
        ItemParameters {
            items: self.items.clone(),
        }
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn fit_irt(
    scores: &Path,
    out: &Path,
    icc: Option<&Path>,
    max_iters: Option<usize>,
    tolerance: Option<f64>,
) -> anyhow::Result<()> {
    let file = File::open(scores).with_context(|| format!("opening {}", scores.display()))?;
    let matrix = ScoreMatrix::read_csv(file).with_context(|| format!("reading {}", scores.display()))?;
    let mut config = FitConfig::default();
    if let Some(v) = max_iters {
        config.max_iters = v;
    }
    if let Some(v) = tolerance {
        config.tolerance = v;
    }
    let fit = fit_2pl(&matrix, &config)?;
    let r = &fit.report;
    println!(
        "{} students x {} items: {} iterations ({:?}), loss {:.6} (entropy floor {:.6})",
        matrix.n_students(),
        matrix.n_items(),
        r.iterations,
        r.stop_reason,
        r.final_loss,
        r.entropy_floor
    );
    for (kind, ids) in [("students", &r.degenerate_students), ("items", &r.degenerate_items)] {
        if !ids.is_empty() {
            eprintln!("warning: all-or-nothing {kind} (estimates sit at a bound): {}", ids.join(", "));
        }
    }
    if let Some(path) = icc {
        write_icc_csv(&fit.items, create(path)?)?;
    }
    let doc = FitDocument {
        items: fit.items.items,
        abilities: fit.abilities.students,
        report: Some(fit.report),
    };
    serde_json::to_writer_pretty(create(out)?, &doc)?;
    Ok(())
}

pub fn bands(params: &Path) -> anyhow::Result<()> {
    let doc = FitDocument::load(params)?;
    println!("item\ta\tb\tband");
    for item in &doc.items {
        let band = classify_discrimination(item.a).with_context(|| format!("item {}", item.id))?;
        println!("{}\t{:.3}\t{:.3}\t{band}", item.id, item.a, item.b);
    }
    Ok(())
}

fn labels_by_response(path: &Path) -> anyhow::Result<BTreeMap<ResponseRef, SoloLabel>> {
    let labels: Vec<SoloLabel> = read_jsonl(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = BTreeMap::new();
    for label in labels {
        let key = label.response_ref.clone();
        if out.insert(key.clone(), label).is_some() {
            bail!("{}: response {key} is labelled twice", path.display());
        }
    }
    Ok(out)
}

pub fn kappa(a: &Path, b: &Path) -> anyhow::Result<()> {
    let la = labels_by_response(a)?;
    let lb = labels_by_response(b)?;
    let (xs, ys): (Vec<_>, Vec<_>) = la
        .iter()
        .filter_map(|(key, x)| lb.get(key).map(|y| (x.category, y.category)))
        .unzip();
    if xs.is_empty() {
        bail!("the two label files share no responses");
    }
    let unmatched = la.len() + lb.len() - 2 * xs.len();
    let k = cohens_kappa(&xs, &ys)?;
    let agree = xs.iter().zip(&ys).filter(|(x, y)| x == y).count();
    println!("kappa = {k:.6}");
    println!("{} shared responses, {agree} in agreement", xs.len());
    if unmatched > 0 {
        eprintln!("warning: {unmatched} label(s) have no counterpart and were ignored");
    }
    Ok(())
}

pub fn scores(records: &Path, policy: GradingPolicy, out: &Path) -> anyhow::Result<()> {
    let records: Vec<GradingRecord> = read_jsonl(records).with_context(|| format!("reading {}", records.display()))?;
    let matrix = score_matrix(&records, policy).with_context(|| format!("no usable {policy} records"))?;
    matrix.write_csv(create(out)?)?;
    println!("{} students x {} items", matrix.n_students(), matrix.n_items());
    Ok(())
}

pub fn report(records_path: &Path, out: &Path, params: Option<&Path>) -> anyhow::Result<()> {
    let records: Vec<GradingRecord> =
        read_jsonl(records_path).with_context(|| format!("reading {}", records_path.display()))?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    // A response graded under both policies counts once for lengths.
    let mut responses: HashMap<&ResponseRef, &GradingRecord> = HashMap::new();
    for r in &records {
        responses.entry(&r.response_ref).or_insert(r);
    }
    let tables = descriptive_report(
        responses.values().map(|r| ResponseSummary::from(*r)),
        records.iter().map(OutcomeSummary::from),
    );
    tables.write_lengths_csv(create(&out.join("lengths.csv"))?)?;
    tables.write_correctness_csv(create(&out.join("correctness.csv"))?)?;
    let mut written = vec!["lengths.csv".to_string(), "correctness.csv".to_string()];

    if let Some(path) = params {
        let doc = FitDocument::load(path)?;
        write_icc_csv(&doc.item_parameters(), create(&out.join("icc.csv"))?)?;
        written.push("icc.csv".into());
    } else {
        for policy in [GradingPolicy::OneAttempt, GradingPolicy::Robustness] {
            if !records.iter().any(|r| r.policy == policy) {
                continue;
            }
            let name = format!("icc_{}.csv", policy.to_string().replace('-', "_"));
            let fitted = score_matrix(&records, policy).and_then(|m| fit_2pl(&m, &FitConfig::default()));
            match fitted {
                Ok(fit) => {
                    write_icc_csv(&fit.items, create(&out.join(&name))?)?;
                    let doc = FitDocument {
                        items: fit.items.items,
                        abilities: fit.abilities.students,
                        report: Some(fit.report),
                    };
                    let params_name = name.replace("icc_", "params_").replace(".csv", ".json");
                    serde_json::to_writer_pretty(create(&out.join(&params_name))?, &doc)?;
                    written.push(name);
                    written.push(params_name);
                }
                Err(e) => eprintln!("warning: no ICC curves for {policy}: {e}"),
            }
        }
    }
    println!("wrote {} to {}", written.join(", "), out.display());
    Ok(())
}
