//! The five pipeline commands and the computations behind them.
//!
//! Stages hand over through files in the output directory. Each command
//! checks that the stages it depends on ran under the same configuration and
//! that their files still match the manifest before reading them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use induction_core::classifier::{read_checkpoint, write_checkpoint, ModelParams};
use induction_core::corpus::{generate_taxonomic_bank, BeliefBank, ConceptId, NodeId, PropertyId, Taxonomy};
use induction_core::digest::sha256_hex;
use induction_core::emergent::{
    control_feature, emergent_auc, emergent_csv, find_emergent_features, EmergentProbe, ProbeResult,
};
use induction_core::geometry::{
    dynamics_geometry_report, embedding_cosine_matrix, generalization_matrix, jaccard_matrix, rsa,
};
use induction_core::induction::{
    parse_records, run_experiment, singleton_sets, write_records, GeneralizationRecord, RecordFiles,
};
use induction_core::phenomena::{
    battery_premise_sets, diversity_from_records, diversity_pairs, monotonicity_chains, monotonicity_from_records,
    similarity_effect, typicality_effect, EffectReport,
};
use induction_core::pretrain::{pretrain, TrainLog};
use induction_core::rng::{derive_seed, stage};
use induction_core::stats::Statistic;
use induction_core::{Error, Result};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, PremiseSpec};
use crate::error::{LabError, LabResult};
use crate::io::{read_bytes, write_bytes};
use crate::manifest::{Manifest, TIMINGS};

pub const BANK: &str = "bank.txt";
pub const TAXONOMY: &str = "taxonomy.txt";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const PHENOMENA: &str = "phenomena.json";
pub const EMERGENT: &str = "emergent.csv";
pub const GEOMETRY: &str = "geometry.json";
pub const REPORT: &str = "report.txt";

fn log(stage: &str, msg: impl AsRef<str>) {
    eprintln!("[{stage}] {}", msg.as_ref());
}

pub fn build_world(cfg: &ExperimentConfig) -> Result<(BeliefBank, Taxonomy)> {
    generate_taxonomic_bank(&cfg.taxonomy_spec())
}

pub fn train_model(cfg: &ExperimentConfig, bank: &BeliefBank) -> Result<(ModelParams, TrainLog)> {
    let params = ModelParams::init(bank, &cfg.model_config())?;
    pretrain(&params, bank, &cfg.train_config())
}

pub fn with_nonce(cfg: &ExperimentConfig, bank: &BeliefBank) -> Result<(BeliefBank, PropertyId)> {
    bank.mint_nonce(&cfg.nonce)
}

pub fn resolve_premises(cfg: &ExperimentConfig, bank: &BeliefBank) -> Result<Vec<Vec<ConceptId>>> {
    match &cfg.premises {
        PremiseSpec::AllSingletons => Ok(singleton_sets(bank)),
        PremiseSpec::Sets(sets) => sets
            .iter()
            .map(|set| {
                set.iter()
                    .map(|name| {
                        bank.concept_by_name(name)
                            .ok_or_else(|| Error::Config(format!("premise concept {name:?} is not in the bank")))
                    })
                    .collect()
            })
            .collect(),
    }
}

/// The taxonomy-branch control (when the bank has one) followed by every
/// cross-cutting feature. Premise choices use seeds derived from the master
/// seed and the probe's position.
pub fn emergent_probes(
    cfg: &ExperimentConfig,
    bank: &BeliefBank,
    taxonomy: &Taxonomy,
) -> Result<Vec<(String, EmergentProbe)>> {
    let base = derive_seed(cfg.seed, stage::EMERGENT);
    let mut probes = Vec::new();
    if let Some(feature) = control_feature(bank, taxonomy)? {
        probes.push((
            "control".to_string(),
            EmergentProbe::control(bank, feature, derive_seed(base, 0))?,
        ));
    }
    for (i, feature) in find_emergent_features(bank, taxonomy, cfg.emergent_min_holders)?
        .into_iter()
        .enumerate()
    {
        let probe = EmergentProbe::with_default_premises(bank, taxonomy, feature, derive_seed(base, i as u64 + 1))?;
        probes.push((format!("emergent{i}"), probe));
    }
    Ok(probes)
}

/// Runs every probe whose holdout has both classes.
pub fn run_emergent(
    cfg: &ExperimentConfig,
    snapshot: &ModelParams,
    bank: &BeliefBank,
    nonce: PropertyId,
    taxonomy: &Taxonomy,
) -> Result<Vec<ProbeResult>> {
    let mut out = Vec::new();
    for (probe_id, probe) in emergent_probes(cfg, bank, taxonomy)? {
        if probe.holders.is_empty() || probe.non_holders.is_empty() {
            log("battery", format!("skipping probe {probe_id}: holdout lacks a class"));
            continue;
        }
        let (auc, _) = emergent_auc(snapshot, bank, &probe, nonce, &cfg.induction_config())?;
        out.push(ProbeResult { probe_id, probe, auc });
    }
    Ok(out)
}

fn category(cfg: &ExperimentConfig, taxonomy: &Taxonomy) -> Result<NodeId> {
    taxonomy
        .node_by_name(&cfg.category)
        .ok_or_else(|| Error::Config(format!("category {:?} is not a taxonomy node", cfg.category)))
}

struct Outputs {
    dir: std::path::PathBuf,
    files: Vec<(String, Vec<u8>)>,
    started: Instant,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
        }
    }

    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> LabResult<()> {
        let (name, bytes) = (name.into(), bytes.into());
        write_bytes(&self.dir.join(&name), &bytes)?;
        self.files.push((name, bytes));
        Ok(())
    }

    fn add_records(&mut self, prefix: &str, files: &RecordFiles) -> LabResult<()> {
        for (name, text) in RecordFiles::NAMES.iter().zip(files.contents()) {
            self.add(format!("{prefix}{name}"), text)?;
        }
        Ok(())
    }
}

/// Reads a prior stage's file, checking it against the manifest.
fn input(dir: &Path, manifest: &Manifest, name: &str, stage: &'static str) -> LabResult<Vec<u8>> {
    let path = dir.join(name);
    let Some(expected) = manifest.artifact_digest(name) else {
        return Err(LabError::Missing {
            artifact: name.into(),
            stage,
        });
    };
    if !path.exists() {
        return Err(LabError::Missing {
            artifact: name.into(),
            stage,
        });
    }
    let bytes = read_bytes(&path)?;
    let found = sha256_hex(&bytes);
    if found != expected {
        return Err(Error::DigestMismatch {
            expected: expected.into(),
            found,
        }
        .into());
    }
    Ok(bytes)
}

fn text(bytes: Vec<u8>, name: &str) -> LabResult<String> {
    String::from_utf8(bytes).map_err(|_| Error::Validation(format!("{name} is not UTF-8")).into())
}

fn load_world(dir: &Path, manifest: &Manifest) -> LabResult<(BeliefBank, Taxonomy)> {
    let bank = BeliefBank::parse(&text(input(dir, manifest, BANK, "generate")?, BANK)?)?;
    let taxonomy = Taxonomy::parse(
        &text(input(dir, manifest, TAXONOMY, "generate")?, TAXONOMY)?,
        bank.num_concepts(),
    )?;
    Ok((bank, taxonomy))
}

fn load_checkpoint(dir: &Path, manifest: &Manifest, bank: &BeliefBank) -> LabResult<ModelParams> {
    Ok(read_checkpoint(&input(dir, manifest, CHECKPOINT, "pretrain")?, bank)?)
}

fn load_records(
    dir: &Path,
    manifest: &Manifest,
    prefix: &str,
    stage: &'static str,
    bank: &BeliefBank,
) -> LabResult<Vec<GeneralizationRecord>> {
    let mut texts = Vec::with_capacity(4);
    for name in RecordFiles::NAMES {
        let full = format!("{prefix}{name}");
        texts.push(text(input(dir, manifest, &full, stage)?, &full)?);
    }
    let [generalization, trace, premise_probs, runs]: [String; 4] = texts.try_into().expect("four tables");
    Ok(parse_records(
        &RecordFiles {
            generalization,
            trace,
            premise_probs,
            runs,
        },
        bank,
    )?)
}

fn record_timing(dir: &Path, stage: &str, started: Instant) -> LabResult<()> {
    let path = dir.join(TIMINGS);
    let mut value: Value = if path.exists() {
        serde_json::from_slice(&read_bytes(&path)?).unwrap_or_else(|_| json!({}))
    } else {
        json!({})
    };
    if !value.is_object() {
        value = json!({});
    }
    value[stage] = json!(started.elapsed().as_secs_f64());
    write_bytes(
        &path,
        format!("{}\n", serde_json::to_string_pretty(&value).expect("json")).as_bytes(),
    )
}

fn finish(
    dir: &Path,
    mut manifest: Manifest,
    cfg: &ExperimentConfig,
    stage: &'static str,
    digest: &str,
    outputs: Outputs,
    extra: &[(&str, Value)],
) -> LabResult<()> {
    manifest.record_stage(cfg, stage, digest, &outputs.files, extra);
    record_timing(dir, stage, outputs.started)?;
    manifest.save(dir)?;
    log(stage, format!("done, {} files", outputs.files.len()));
    Ok(())
}

pub fn cmd_generate(cfg: &ExperimentConfig) -> LabResult<()> {
    let dir = &cfg.out_dir;
    let mut out = Outputs::new(dir);
    let mut manifest = Manifest::load_or_new(dir)?;
    manifest.invalidate_from(dir, "generate")?;
    let (bank, taxonomy) = build_world(cfg)?;
    log(
        "generate",
        format!(
            "{} concepts, {} properties, {} beliefs",
            bank.num_concepts(),
            bank.num_properties(),
            bank.beliefs().len()
        ),
    );
    out.add(BANK, bank.to_text())?;
    out.add(TAXONOMY, taxonomy.to_text())?;
    finish(
        dir,
        manifest,
        cfg,
        "generate",
        &cfg.generate_digest(),
        out,
        &[("bank_digest", json!(bank.digest()))],
    )
}

pub fn cmd_pretrain(cfg: &ExperimentConfig) -> LabResult<()> {
    let dir = &cfg.out_dir;
    let mut out = Outputs::new(dir);
    let mut manifest = Manifest::load_or_new(dir)?;
    manifest.require_stage("generate", &cfg.generate_digest(), BANK)?;
    let (bank, _) = load_world(dir, &manifest)?;
    manifest.invalidate_from(dir, "pretrain")?;
    let (trained, train_log) = train_model(cfg, &bank)?;
    log(
        "pretrain",
        format!(
            "accuracy {} after {} epochs",
            train_log.final_accuracy, train_log.epochs_run
        ),
    );
    let checkpoint = write_checkpoint(&trained, &bank)?;
    let checkpoint_digest = sha256_hex(&checkpoint);
    out.add(CHECKPOINT, checkpoint)?;
    out.add(TRAIN_LOG, train_log.to_csv())?;
    let summary = json!({
        "final_accuracy": train_log.final_accuracy,
        "epochs_run": train_log.epochs_run,
        "final_loss": train_log.epoch_losses.last(),
    });
    finish(
        dir,
        manifest,
        cfg,
        "pretrain",
        &cfg.pretrain_digest(),
        out,
        &[("checkpoint_digest", json!(checkpoint_digest)), ("pretrain", summary)],
    )
}

pub fn cmd_induce(cfg: &ExperimentConfig) -> LabResult<()> {
    let dir = &cfg.out_dir;
    let mut out = Outputs::new(dir);
    let mut manifest = Manifest::load_or_new(dir)?;
    manifest.require_stage("generate", &cfg.generate_digest(), BANK)?;
    manifest.require_stage("pretrain", &cfg.pretrain_digest(), CHECKPOINT)?;
    let (bank, _) = load_world(dir, &manifest)?;
    let snapshot = load_checkpoint(dir, &manifest, &bank)?;
    manifest.invalidate_from(dir, "induce")?;
    let (nb, nonce) = with_nonce(cfg, &bank)?;
    let sets = resolve_premises(cfg, &nb)?;
    let records = run_experiment(&snapshot, &nb, nonce, &sets, &cfg.induction_config())?;
    let reached = records.iter().filter(|r| r.trace.reached()).count();
    log(
        "induce",
        format!("{} runs, {reached} reached the criterion", records.len()),
    );
    out.add_records("", &write_records(&records, &nb)?)?;
    finish(dir, manifest, cfg, "induce", &cfg.induce_digest(), out, &[])
}

fn effect_entry(
    name: &str,
    report: Result<EffectReport>,
    detail: &str,
    digest: &str,
    out: &mut Outputs,
) -> LabResult<Value> {
    match report {
        Ok(r) => {
            out.add(detail, r.detail_csv())?;
            Ok(json!({
                "name": name,
                "statistic": r.statistic,
                "support": r.support,
                "config_digest": digest,
                "detail": detail,
            }))
        }
        Err(Error::UndefinedStatistic(why)) => Ok(json!({
            "name": name,
            "statistic": null,
            "support": 0,
            "config_digest": digest,
            "detail": null,
            "note": format!("undefined: {why}"),
        })),
        Err(e) => Err(e.into()),
    }
}

fn statistic_json(s: &Statistic) -> Value {
    match s {
        Statistic::Value(v) => json!(v),
        Statistic::Undefined(_) => Value::Null,
    }
}

pub fn cmd_battery(cfg: &ExperimentConfig) -> LabResult<()> {
    let dir = &cfg.out_dir;
    let mut out = Outputs::new(dir);
    let mut manifest = Manifest::load_or_new(dir)?;
    manifest.require_stage("generate", &cfg.generate_digest(), BANK)?;
    manifest.require_stage("pretrain", &cfg.pretrain_digest(), CHECKPOINT)?;
    manifest.require_stage("induce", &cfg.induce_digest(), "generalization.csv")?;
    let (bank, taxonomy) = load_world(dir, &manifest)?;
    let snapshot = load_checkpoint(dir, &manifest, &bank)?;
    let (nb, nonce) = with_nonce(cfg, &bank)?;
    let records = load_records(dir, &manifest, "", "induce", &nb)?;
    manifest.invalidate_from(dir, "battery")?;

    let digest = cfg.battery_digest();
    let ind = cfg.induction_config();
    let cat = category(cfg, &taxonomy)?;
    let needs_singletons = cfg.similarity || cfg.typicality || cfg.geometry;
    if needs_singletons && cfg.premises != PremiseSpec::AllSingletons {
        return Err(Error::Config(
            "similarity, typicality and geometry read singleton records: set premises = all-singletons and re-run induce".into(),
        )
        .into());
    }

    let mut effects = Vec::new();
    if cfg.similarity {
        let g = generalization_matrix(&records, nb.num_concepts())?;
        out.add("generalization_matrix.csv", g.to_csv(&nb)?)?;
        effects.push(effect_entry(
            "similarity",
            similarity_effect(&g, &nb),
            "similarity.csv",
            &digest,
            &mut out,
        )?);
    }
    if cfg.typicality {
        let r = typicality_effect(&records, &nb, &taxonomy, cat);
        effects.push(effect_entry("typicality", r, "typicality.csv", &digest, &mut out)?);
    }
    if cfg.diversity {
        let pairs = diversity_pairs(
            &taxonomy,
            cat,
            cfg.diversity_pairs,
            derive_seed(cfg.seed, stage::DIVERSITY),
        )?;
        let recs = run_experiment(&snapshot, &nb, nonce, &battery_premise_sets(&pairs, &[]), &ind)?;
        out.add_records("records/diversity/", &write_records(&recs, &nb)?)?;
        let r = diversity_from_records(&pairs, &recs, &nb, &taxonomy, cat);
        effects.push(effect_entry("diversity", r, "diversity.csv", &digest, &mut out)?);
    }
    if cfg.monotonicity {
        let chains = monotonicity_chains(
            &taxonomy,
            cat,
            cfg.monotonicity_chains,
            derive_seed(cfg.seed, stage::MONOTONICITY),
        )?;
        let recs = run_experiment(&snapshot, &nb, nonce, &battery_premise_sets(&[], &chains), &ind)?;
        out.add_records("records/monotonicity/", &write_records(&recs, &nb)?)?;
        let r = monotonicity_from_records(&chains, &recs, &nb, &taxonomy, cat);
        effects.push(effect_entry("monotonicity", r, "monotonicity.csv", &digest, &mut out)?);
    }
    if !effects.is_empty() {
        out.add(
            PHENOMENA,
            format!("{}\n", serde_json::to_string_pretty(&effects).expect("json")),
        )?;
    }

    if cfg.emergent {
        let results = run_emergent(cfg, &snapshot, &nb, nonce, &taxonomy)?;
        out.add(EMERGENT, emergent_csv(&results, &nb)?)?;
    }

    if cfg.geometry {
        let cos = embedding_cosine_matrix(&snapshot)?;
        let jac = jaccard_matrix(&bank)?;
        let report = dynamics_geometry_report(&records, &snapshot)?;
        out.add("embedding_cosine.csv", cos.to_csv(&bank)?)?;
        out.add("bank_jaccard.csv", jac.to_csv(&bank)?)?;
        out.add("per_premise_rho.csv", report.per_premise_csv(&bank)?)?;
        let excluded: Vec<&str> = report
            .excluded
            .iter()
            .map(|c| bank.concept(*c).map(|c| c.name.as_str()))
            .collect::<Result<_>>()?;
        let geometry = json!({
            "rsa_embed_vs_jaccard": statistic_json(&Statistic::from_result(rsa(&cos, &jac))?),
            "per_premise_rho": "per_premise_rho.csv",
            "centrality_rho": statistic_json(&report.centrality_rho),
            "excluded_runs": excluded,
            "config_digest": digest,
        });
        out.add(
            GEOMETRY,
            format!("{}\n", serde_json::to_string_pretty(&geometry).expect("json")),
        )?;
    }
    finish(dir, manifest, cfg, "battery", &digest, out, &[])
}

fn fmt_stat(v: &Value) -> String {
    v.as_f64()
        .map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"))
}

/// Plain-text summary of every statistic in the output directory.
pub fn render_report(dir: &Path) -> LabResult<String> {
    let manifest = Manifest::load_or_new(dir)?;
    let mut s = String::new();
    let _ = writeln!(s, "stage      config digest");
    for stage in ["generate", "pretrain", "induce", "battery"] {
        let d = manifest.stage_digest(stage).unwrap_or("(not run)");
        let _ = writeln!(s, "{stage:<10} {}", &d[..d.len().min(16)]);
    }
    let _ = writeln!(s);
    let bank_text = text(input(dir, &manifest, BANK, "generate")?, BANK)?;
    let bank = BeliefBank::parse(&bank_text)?;
    let _ = writeln!(
        s,
        "bank        {} concepts, {} properties, {} beliefs",
        bank.num_concepts(),
        bank.num_properties(),
        bank.beliefs().len()
    );
    if let Some(p) = manifest.get("pretrain") {
        let _ = writeln!(
            s,
            "pretrain    accuracy {} after {} epochs",
            fmt_stat(&p["final_accuracy"]),
            p["epochs_run"]
        );
    }
    let config = manifest.get("config").cloned().unwrap_or(Value::Null);
    let show = |k: &str| config[k].as_str().unwrap_or("?").to_string();
    let _ = writeln!(
        s,
        "induction   lr {}, tau {}, max_steps {}, scope {}, init {}",
        show("induce_lr"),
        show("tau"),
        show("max_steps"),
        show("scope"),
        show("nonce_init")
    );
    let runs = text(input(dir, &manifest, "runs.csv", "induce")?, "runs.csv")?;
    let mut steps: Vec<usize> = Vec::new();
    let mut total = 0;
    for line in runs.lines().skip(1).filter(|l| !l.is_empty()) {
        total += 1;
        if let Some(Ok(v)) = line.split(',').nth(3).map(str::parse::<usize>) {
            steps.push(v);
        }
    }
    steps.sort_unstable();
    let median = steps.get(steps.len() / 2).map_or("-".to_string(), |v| v.to_string());
    let _ = writeln!(
        s,
        "runs        {total} runs, {} reached, median steps {median}",
        steps.len()
    );

    let effects: Value = serde_json::from_slice(&input(dir, &manifest, PHENOMENA, "battery")?)
        .map_err(|e| LabError::Manifest(format!("{PHENOMENA}: {e}")))?;
    let _ = writeln!(s, "\neffect         statistic   support");
    for e in effects.as_array().into_iter().flatten() {
        let _ = writeln!(
            s,
            "{:<14} {:<11} {}",
            e["name"].as_str().unwrap_or("?"),
            fmt_stat(&e["statistic"]),
            e["support"]
        );
    }
    if manifest.artifact_digest(EMERGENT).is_some() {
        let csv = text(input(dir, &manifest, EMERGENT, "battery")?, EMERGENT)?;
        let _ = writeln!(s, "\nprobe        feature      auc     holders  non-holders");
        for line in csv.lines().skip(1).filter(|l| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() == 6 {
                let auc: f64 = f[3].parse().unwrap_or(f64::NAN);
                let _ = writeln!(s, "{:<12} {:<12} {:<7.4} {:<8} {}", f[0], f[1], auc, f[4], f[5]);
            }
        }
    }
    if manifest.artifact_digest(GEOMETRY).is_some() {
        let g: Value = serde_json::from_slice(&input(dir, &manifest, GEOMETRY, "battery")?)
            .map_err(|e| LabError::Manifest(format!("{GEOMETRY}: {e}")))?;
        let _ = writeln!(
            s,
            "\ngeometry    rsa(embedding cosine, bank jaccard) {}",
            fmt_stat(&g["rsa_embed_vs_jaccard"])
        );
        let _ = writeln!(
            s,
            "            rho(steps to criterion, centrality) {}",
            fmt_stat(&g["centrality_rho"])
        );
        let excluded: Vec<&str> = g["excluded_runs"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(Value::as_str)
            .collect();
        let _ = writeln!(
            s,
            "            runs not reaching the criterion: {}",
            if excluded.is_empty() {
                "none".into()
            } else {
                excluded.join(" ")
            }
        );
    }
    Ok(s)
}

pub fn cmd_report(cfg: &ExperimentConfig) -> LabResult<String> {
    let dir = &cfg.out_dir;
    let mut out = Outputs::new(dir);
    let mut manifest = Manifest::load_or_new(dir)?;
    manifest.require_stage("battery", &cfg.battery_digest(), PHENOMENA)?;
    let report = render_report(dir)?;
    manifest.invalidate_from(dir, "report")?;
    out.add(REPORT, report.clone())?;
    let digest = manifest.stage_digest("battery").unwrap_or_default().to_string();
    finish(dir, manifest, cfg, "report", &digest, out, &[])?;
    Ok(report)
}

/// Digest of every file the manifest lists, recomputed from disk.
pub fn verify_artifacts(dir: &Path) -> LabResult<BTreeMap<String, bool>> {
    let manifest = Manifest::load_or_new(dir)?;
    let mut out = BTreeMap::new();
    for (name, digest) in manifest.artifacts() {
        let ok = read_bytes(&dir.join(&name))
            .map(|b| sha256_hex(&b) == digest)
            .unwrap_or(false);
        out.insert(name, ok);
    }
    Ok(out)
}
