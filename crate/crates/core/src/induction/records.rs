//! CSV form of generalization records.
//!
//! Four tables share a `run_id` column (position in the experiment):
//!
//! * `generalization.csv`: `run_id,premise_set,nonce,concept,score`
//! * `trace.csv`: `run_id,step,loss,min_premise_prob`
//! * `premise_probs.csv`: `run_id,step,concept,prob`
//! * `runs.csv`: `run_id,premise_set,nonce,steps_to_criterion,config_digest`
//!
//! `premise_set` is the premise concept names, sorted, joined by `+`.
//! Unreached runs carry `NA` for `steps_to_criterion`. Floats are written in
//! shortest round-trip form so parsing reproduces records exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{GeneralizationRecord, InductionTrace};
use crate::corpus::{BeliefBank, ConceptId, PropertyId};
use crate::{Error, Result};

pub const GENERALIZATION_HEADER: &str = "run_id,premise_set,nonce,concept,score";
pub const TRACE_HEADER: &str = "run_id,step,loss,min_premise_prob";
pub const PREMISE_PROBS_HEADER: &str = "run_id,step,concept,prob";
pub const RUNS_HEADER: &str = "run_id,premise_set,nonce,steps_to_criterion,config_digest";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordFiles {
    pub generalization: String,
    pub trace: String,
    pub premise_probs: String,
    pub runs: String,
}

impl RecordFiles {
    pub const NAMES: [&'static str; 4] = ["generalization.csv", "trace.csv", "premise_probs.csv", "runs.csv"];

    pub fn contents(&self) -> [&str; 4] {
        [&self.generalization, &self.trace, &self.premise_probs, &self.runs]
    }
}

pub fn premise_set_label(bank: &BeliefBank, premises: &[ConceptId]) -> Result<String> {
    let mut names = premises
        .iter()
        .map(|&c| Ok(bank.concept(c)?.name.as_str()))
        .collect::<Result<Vec<_>>>()?;
    names.sort_unstable();
    Ok(names.join("+"))
}

pub fn write_records(records: &[GeneralizationRecord], bank: &BeliefBank) -> Result<RecordFiles> {
    let mut g = format!("{GENERALIZATION_HEADER}\n");
    let mut t = format!("{TRACE_HEADER}\n");
    let mut pp = format!("{PREMISE_PROBS_HEADER}\n");
    let mut runs = format!("{RUNS_HEADER}\n");
    for (run, r) in records.iter().enumerate() {
        let label = premise_set_label(bank, &r.premises)?;
        let nonce = &bank.property(r.nonce)?.name;
        if r.scores.len() != bank.num_concepts() {
            return Err(Error::Validation(format!("run {run} has {} scores", r.scores.len())));
        }
        for (c, s) in r.scores.iter().enumerate() {
            let _ = writeln!(g, "{run},{label},{nonce},{},{s}", bank.concept(ConceptId(c))?.name);
        }
        for (step, (loss, probs)) in r.trace.losses.iter().zip(&r.trace.premise_probs).enumerate() {
            let _ = writeln!(t, "{run},{step},{loss},{}", r.trace.min_premise_prob(step));
            for (c, p) in r.premises.iter().zip(probs) {
                let _ = writeln!(pp, "{run},{step},{},{p}", bank.concept(*c)?.name);
            }
        }
        let steps = r.trace.steps_to_criterion.map_or("NA".to_string(), |s| s.to_string());
        let _ = writeln!(runs, "{run},{label},{nonce},{steps},{}", r.config_digest);
    }
    Ok(RecordFiles {
        generalization: g,
        trace: t,
        premise_probs: pp,
        runs,
    })
}

struct Table<'a> {
    name: &'static str,
    rows: Vec<(usize, Vec<&'a str>)>,
}

fn table<'a>(name: &'static str, text: &'a str, header: &str) -> Result<Table<'a>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("{name}: expected header {header:?}"),
            })
        }
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("{name}: expected {width} fields, got {}", fields.len()),
            });
        }
        rows.push((i + 1, fields));
    }
    Ok(Table { name, rows })
}

fn num<T: std::str::FromStr>(name: &str, line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{name}: cannot parse {s:?}"),
    })
}

fn concept(bank: &BeliefBank, name: &str, line: usize, s: &str) -> Result<ConceptId> {
    bank.concept_by_name(s).ok_or_else(|| Error::Parse {
        line,
        msg: format!("{name}: unknown concept {s:?}"),
    })
}

fn property(bank: &BeliefBank, name: &str, line: usize, s: &str) -> Result<PropertyId> {
    bank.property_by_name(s).ok_or_else(|| Error::Parse {
        line,
        msg: format!("{name}: unknown property {s:?}"),
    })
}

/// Inverse of [`write_records`].
pub fn parse_records(files: &RecordFiles, bank: &BeliefBank) -> Result<Vec<GeneralizationRecord>> {
    let runs = table("runs.csv", &files.runs, RUNS_HEADER)?;
    let mut records = Vec::with_capacity(runs.rows.len());
    for (line, f) in &runs.rows {
        let id: usize = num(runs.name, *line, f[0])?;
        if id != records.len() {
            return Err(Error::Parse {
                line: *line,
                msg: format!("runs.csv: run_id {id} out of order"),
            });
        }
        let mut premises = f[1]
            .split('+')
            .map(|s| concept(bank, runs.name, *line, s))
            .collect::<Result<Vec<_>>>()?;
        premises.sort();
        premises.dedup();
        let steps = match f[3] {
            "NA" => None,
            s => Some(num(runs.name, *line, s)?),
        };
        records.push(GeneralizationRecord {
            premises,
            nonce: property(bank, runs.name, *line, f[2])?,
            scores: Vec::new(),
            trace: InductionTrace {
                losses: Vec::new(),
                premise_probs: Vec::new(),
                steps_to_criterion: steps,
            },
            config_digest: f[4].to_string(),
        });
    }
    let n_runs = records.len();
    let run_of = move |name: &'static str, line: usize, s: &str| -> Result<usize> {
        let id: usize = num(name, line, s)?;
        if id >= n_runs {
            return Err(Error::Parse {
                line,
                msg: format!("{name}: unknown run_id {id}"),
            });
        }
        Ok(id)
    };

    let gen = table("generalization.csv", &files.generalization, GENERALIZATION_HEADER)?;
    let mut scores: Vec<BTreeMap<ConceptId, f64>> = vec![BTreeMap::new(); records.len()];
    for (line, f) in &gen.rows {
        let run = run_of(gen.name, *line, f[0])?;
        let c = concept(bank, gen.name, *line, f[3])?;
        if scores[run].insert(c, num(gen.name, *line, f[4])?).is_some() {
            return Err(Error::Parse {
                line: *line,
                msg: format!("generalization.csv: duplicate score for {}", f[3]),
            });
        }
    }
    for (run, s) in scores.into_iter().enumerate() {
        if s.len() != bank.num_concepts() {
            return Err(Error::Validation(format!(
                "generalization.csv: run {run} scores {} of {} concepts",
                s.len(),
                bank.num_concepts()
            )));
        }
        records[run].scores = s.into_values().collect();
    }

    let tr = table("trace.csv", &files.trace, TRACE_HEADER)?;
    for (line, f) in &tr.rows {
        let run = run_of(tr.name, *line, f[0])?;
        let step: usize = num(tr.name, *line, f[1])?;
        if step != records[run].trace.losses.len() {
            return Err(Error::Parse {
                line: *line,
                msg: format!("trace.csv: step {step} out of order"),
            });
        }
        records[run].trace.losses.push(num(tr.name, *line, f[2])?);
    }

    let pp = table("premise_probs.csv", &files.premise_probs, PREMISE_PROBS_HEADER)?;
    for (line, f) in &pp.rows {
        let run = run_of(pp.name, *line, f[0])?;
        let step: usize = num(pp.name, *line, f[1])?;
        let probs = &mut records[run].trace.premise_probs;
        if step == probs.len() {
            probs.push(Vec::new());
        } else if step + 1 != probs.len() {
            return Err(Error::Parse {
                line: *line,
                msg: format!("premise_probs.csv: step {step} out of order"),
            });
        }
        probs[step].push(num(pp.name, *line, f[3])?);
    }

    for (run, r) in records.iter().enumerate() {
        let t = &r.trace;
        if t.premise_probs.len() != t.losses.len() || t.premise_probs.iter().any(|p| p.len() != r.premises.len()) {
            return Err(Error::Validation(format!("run {run}: trace tables disagree")));
        }
        if t.losses.is_empty() {
            return Err(Error::Validation(format!("run {run}: empty trace")));
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_taxonomic_bank, TaxonomySpec};

    fn sample() -> (BeliefBank, Vec<GeneralizationRecord>) {
        let (bank, _) = generate_taxonomic_bank(&TaxonomySpec::default()).unwrap();
        let (bank, nonce) = bank.mint_nonce("blick").unwrap();
        let n = bank.num_concepts();
        let records = vec![
            GeneralizationRecord {
                premises: vec![ConceptId(0), ConceptId(4)],
                nonce,
                scores: (0..n).map(|i| 0.1 + i as f64 / 17.0).collect(),
                trace: InductionTrace {
                    losses: vec![0.7, 0.3, 0.05],
                    premise_probs: vec![vec![0.5, 0.5], vec![0.7, 0.8], vec![0.95, 0.91]],
                    steps_to_criterion: Some(2),
                },
                config_digest: "abc".into(),
            },
            GeneralizationRecord {
                premises: vec![ConceptId(2)],
                nonce,
                scores: vec![1.0 / 3.0; n],
                trace: InductionTrace {
                    losses: vec![0.69, 0.6],
                    premise_probs: vec![vec![0.5], vec![0.55]],
                    steps_to_criterion: None,
                },
                config_digest: "abc".into(),
            },
        ];
        (bank, records)
    }

    #[test]
    fn round_trip_is_exact() {
        let (bank, records) = sample();
        let files = write_records(&records, &bank).unwrap();
        assert!(files
            .generalization
            .starts_with("run_id,premise_set,nonce,concept,score\n0,n0_0+n1_1,blick,n0_0,0.1\n"));
        assert!(files.runs.contains("\n1,n0_2,blick,NA,abc\n"));
        assert!(files.trace.contains("\n0,1,0.3,0.7\n"));
        assert_eq!(parse_records(&files, &bank).unwrap(), records);
    }

    #[test]
    fn rejects_damaged_tables() {
        let (bank, records) = sample();
        let files = write_records(&records, &bank).unwrap();
        let mut bad = files.clone();
        bad.generalization = bad.generalization.replacen("n0_0,0.1", "zzz,0.1", 1);
        assert!(parse_records(&bad, &bank).is_err());
        let mut bad = files.clone();
        bad.trace = bad.trace.replace("run_id", "run");
        assert!(parse_records(&bad, &bank).is_err());
        let mut bad = files;
        bad.premise_probs = bad.premise_probs.lines().take(3).collect::<Vec<_>>().join("\n");
        assert!(parse_records(&bad, &bank).is_err());
    }
}
