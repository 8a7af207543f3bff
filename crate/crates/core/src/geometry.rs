//! Representational geometry of the concept embeddings and its relation to
//! induction behaviour.

use std::fmt::Write as _;

use crate::classifier::ModelParams;
use crate::corpus::{BeliefBank, ConceptId, SimilarityOracle};
use crate::induction::GeneralizationRecord;
use crate::stats::{spearman, Statistic};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    EmbeddingCosine,
    BankJaccard,
    Generalization,
}

impl MatrixKind {
    fn symmetric(self) -> bool {
        !matches!(self, MatrixKind::Generalization)
    }
}

/// Square matrix indexed by concept id, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
    kind: MatrixKind,
}

impl SimilarityMatrix {
    pub fn new(n: usize, values: Vec<f64>, kind: MatrixKind) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "{n}x{n} matrix needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("similarity matrix entry".into()));
        }
        Ok(Self { n, values, kind })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.values[a * self.n..(a + 1) * self.n]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Strictly-upper-triangle entries, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// CSV with a `concept` column followed by one column per concept.
    pub fn to_csv(&self, bank: &BeliefBank) -> Result<String> {
        if bank.num_concepts() != self.n {
            return Err(Error::Validation(
                "matrix and bank disagree on the concept count".into(),
            ));
        }
        let names: Vec<&str> = bank.concepts().iter().map(|c| c.name.as_str()).collect();
        let mut out = format!("concept,{}\n", names.join(","));
        for (i, name) in names.iter().enumerate() {
            out.push_str(name);
            for v in self.row(i) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// Pairwise cosine similarity of concept-table rows.
pub fn embedding_cosine_matrix(params: &ModelParams) -> Result<SimilarityMatrix> {
    let table = params.concept_table();
    let n = table.rows();
    let norms: Vec<f64> = (0..n)
        .map(|i| table.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(i) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::InvalidArgument(format!("concept {i} has a zero embedding")));
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let dot: f64 = table.row(i).iter().zip(table.row(j)).map(|(a, b)| a * b).sum();
            let c = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            values[i * n + j] = c;
            values[j * n + i] = c;
        }
    }
    SimilarityMatrix::new(n, values, MatrixKind::EmbeddingCosine)
}

/// Jaccard similarity of Known true-sets.
pub fn jaccard_matrix(bank: &BeliefBank) -> Result<SimilarityMatrix> {
    let oracle = SimilarityOracle::new(bank);
    let n = bank.num_concepts();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let s = oracle.similarity(ConceptId(i), ConceptId(j))?;
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    SimilarityMatrix::new(n, values, MatrixKind::BankJaccard)
}

/// `G[a][b]`: score of concept `b` after induction on `{a}`.
///
/// Needs exactly one singleton record per concept; other records are ignored.
pub fn generalization_matrix(records: &[GeneralizationRecord], n: usize) -> Result<SimilarityMatrix> {
    let mut rows: Vec<Option<&[f64]>> = vec![None; n];
    for r in records.iter().filter(|r| r.premises.len() == 1) {
        let a = r.premises[0].index();
        if a >= n || r.scores.len() != n {
            return Err(Error::Validation(format!(
                "record for concept {a} does not fit a {n}-concept matrix"
            )));
        }
        if rows[a].replace(&r.scores).is_some() {
            return Err(Error::Validation(format!("two singleton records for concept {a}")));
        }
    }
    let mut values = Vec::with_capacity(n * n);
    for (a, row) in rows.into_iter().enumerate() {
        values.extend_from_slice(row.ok_or_else(|| Error::Validation(format!("no singleton record for concept {a}")))?);
    }
    SimilarityMatrix::new(n, values, MatrixKind::Generalization)
}

/// Spearman correlation of the two upper triangles.
pub fn rsa(a: &SimilarityMatrix, b: &SimilarityMatrix) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::InvalidArgument(format!(
            "rsa over {}x{} and {}x{} matrices",
            a.n, a.n, b.n, b.n
        )));
    }
    for m in [a, b] {
        if !m.kind.symmetric() || !m.is_symmetric() {
            return Err(Error::InvalidArgument(format!(
                "rsa needs symmetric matrices, got {:?}",
                m.kind
            )));
        }
    }
    spearman(&a.upper_triangle(), &b.upper_triangle())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsGeometryReport {
    /// Per premise `a`: rho between `G[a][b]` and `cos(a, b)` over `b != a`.
    pub per_premise: Vec<(ConceptId, Statistic)>,
    /// Mean cosine of each concept to all others.
    pub centrality: Vec<f64>,
    /// Rho between steps to criterion and centrality over reached runs.
    pub centrality_rho: Statistic,
    /// Premises whose run did not reach the criterion.
    pub excluded: Vec<ConceptId>,
}

impl DynamicsGeometryReport {
    pub fn per_premise_csv(&self, bank: &BeliefBank) -> Result<String> {
        let mut out = String::from("premise,rho,centrality\n");
        for (c, rho) in &self.per_premise {
            let _ = writeln!(out, "{},{rho},{}", bank.concept(*c)?.name, self.centrality[c.index()]);
        }
        Ok(out)
    }
}

pub fn dynamics_geometry_report(
    records: &[GeneralizationRecord],
    params: &ModelParams,
) -> Result<DynamicsGeometryReport> {
    let cos = embedding_cosine_matrix(params)?;
    let n = cos.n();
    let g = generalization_matrix(records, n)?;

    let mut per_premise = Vec::with_capacity(n);
    for a in 0..n {
        let others = || (0..n).filter(move |&b| b != a);
        let gen: Vec<f64> = others().map(|b| g.get(a, b)).collect();
        let sim: Vec<f64> = others().map(|b| cos.get(a, b)).collect();
        per_premise.push((ConceptId(a), Statistic::from_result(spearman(&gen, &sim))?));
    }

    let centrality: Vec<f64> = (0..n)
        .map(|a| (0..n).filter(|&b| b != a).map(|b| cos.get(a, b)).sum::<f64>() / (n - 1).max(1) as f64)
        .collect();
    let mut steps = Vec::new();
    let mut central = Vec::new();
    let mut excluded = Vec::new();
    for r in records.iter().filter(|r| r.premises.len() == 1) {
        let a = r.premises[0];
        match r.trace.steps_to_criterion {
            Some(s) => {
                steps.push(s as f64);
                central.push(centrality[a.index()]);
            }
            None => excluded.push(a),
        }
    }
    excluded.sort();
    let centrality_rho = if steps.len() < 3 {
        Statistic::Undefined(format!("only {} runs reached the criterion", steps.len()))
    } else {
        Statistic::from_result(spearman(&steps, &central))?
    };
    Ok(DynamicsGeometryReport {
        per_premise,
        centrality,
        centrality_rho,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ModelConfig;
    use crate::corpus::{generate_taxonomic_bank, TaxonomySpec};
    use crate::induction::InductionTrace;
    use crate::tensor::Tensor;
    use proptest::prelude::*;

    fn params_with_table(rows: &[&[f64]]) -> ModelParams {
        let cfg = ModelConfig {
            embed_dim: rows[0].len(),
            hidden_dim: 2,
            ..ModelConfig::default()
        };
        let d = cfg.embed_dim;
        ModelParams::from_parts(
            cfg,
            [
                Tensor::from_rows(rows).unwrap(),
                Tensor::zeros(1, d),
                Tensor::zeros(2, 2 * d),
                Tensor::zeros(1, 2),
                Tensor::zeros(2, 1),
                Tensor::zeros(1, 1),
            ],
        )
        .unwrap()
    }

    fn record(a: usize, scores: Vec<f64>, steps: Option<usize>) -> GeneralizationRecord {
        GeneralizationRecord {
            premises: vec![ConceptId(a)],
            nonce: crate::corpus::PropertyId(0),
            scores,
            trace: InductionTrace {
                losses: vec![0.5],
                premise_probs: vec![vec![0.5]],
                steps_to_criterion: steps,
            },
            config_digest: String::new(),
        }
    }

    #[test]
    fn cosine_basics() {
        let p = params_with_table(&[&[1.0, 0.0], &[0.0, 2.0], &[3.0, 3.0]]);
        let m = embedding_cosine_matrix(&p).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert!((m.get(0, 2) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(m.is_symmetric());
        let zero = params_with_table(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let msg = embedding_cosine_matrix(&zero).unwrap_err().to_string();
        assert!(msg.contains("concept 1"), "{msg}");
    }

    #[test]
    fn rsa_examples() {
        let a = SimilarityMatrix::new(
            3,
            vec![1.0, 0.2, 0.5, 0.2, 1.0, 0.9, 0.5, 0.9, 1.0],
            MatrixKind::BankJaccard,
        )
        .unwrap();
        assert!((rsa(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b = SimilarityMatrix::new(
            3,
            vec![1.0, 0.9, 0.5, 0.9, 1.0, 0.2, 0.5, 0.2, 1.0],
            MatrixKind::EmbeddingCosine,
        )
        .unwrap();
        assert!((rsa(&a, &b).unwrap() + 1.0).abs() < 1e-12);
        let asym = SimilarityMatrix::new(
            3,
            vec![1.0, 0.1, 0.2, 0.3, 1.0, 0.4, 0.2, 0.4, 1.0],
            MatrixKind::BankJaccard,
        )
        .unwrap();
        assert!(rsa(&a, &asym).is_err());
        let g = SimilarityMatrix {
            kind: MatrixKind::Generalization,
            ..a.clone()
        };
        assert!(rsa(&a, &g).is_err());
        let small = SimilarityMatrix::new(2, vec![1.0, 0.5, 0.5, 1.0], MatrixKind::BankJaccard).unwrap();
        assert!(rsa(&a, &small).is_err());
    }

    #[test]
    fn jaccard_matrix_is_symmetric_unit_diagonal() {
        let (bank, _) = generate_taxonomic_bank(&TaxonomySpec::default()).unwrap();
        let m = jaccard_matrix(&bank).unwrap();
        assert!(m.is_symmetric());
        assert!((0..m.n()).all(|i| m.get(i, i) == 1.0));
        assert!(m.upper_triangle().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn generalization_matrix_needs_every_singleton() {
        let recs: Vec<_> = (0..3).map(|a| record(a, vec![a as f64 / 10.0; 3], Some(1))).collect();
        let g = generalization_matrix(&recs, 3).unwrap();
        assert_eq!(g.get(2, 0), 0.2);
        assert!(generalization_matrix(&recs[..2], 3).is_err());
        let mut dup = recs.clone();
        dup.push(recs[0].clone());
        assert!(generalization_matrix(&dup, 3).is_err());
    }

    #[test]
    fn report_on_synthetic_records() {
        let p = params_with_table(&[&[1.0, 0.0], &[0.9, 0.3], &[0.2, 1.0], &[-0.5, 0.7], &[0.1, -1.0]]);
        let cos = embedding_cosine_matrix(&p).unwrap();
        let recs: Vec<_> = (0..5).map(|a| record(a, cos.row(a).to_vec(), Some(3))).collect();
        let report = dynamics_geometry_report(&recs, &p).unwrap();
        for (_, rho) in &report.per_premise {
            assert!((rho.value().unwrap() - 1.0).abs() < 1e-12);
        }
        // equal step counts leave part (ii) undefined
        assert!(matches!(report.centrality_rho, Statistic::Undefined(_)));

        let mut recs = recs;
        recs[4].trace.steps_to_criterion = None;
        for (i, r) in recs.iter_mut().enumerate().take(4) {
            r.trace.steps_to_criterion = Some(10 + i);
        }
        let report = dynamics_geometry_report(&recs, &p).unwrap();
        assert_eq!(report.excluded, vec![ConceptId(4)]);
        assert!(report.centrality_rho.value().is_some());
    }

    proptest! {
        #[test]
        fn cosine_scale_invariant(
            data in prop::collection::vec(0.1f64..2.0, 12),
            scale in 0.01f64..100.0,
        ) {
            let rows: Vec<&[f64]> = data.chunks(3).collect();
            let a = embedding_cosine_matrix(&params_with_table(&rows)).unwrap();
            let scaled: Vec<f64> = data.iter().map(|v| v * scale).collect();
            let rows: Vec<&[f64]> = scaled.chunks(3).collect();
            let b = embedding_cosine_matrix(&params_with_table(&rows)).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn rsa_symmetric_and_monotone_invariant(
            ua in prop::collection::vec(0.0f64..1.0, 10),
            ub in prop::collection::vec(0.0f64..1.0, 10),
        ) {
            let build = |u: &[f64], f: &dyn Fn(f64) -> f64| {
                let n = 5;
                let mut v = vec![1.0; n * n];
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        v[i * n + j] = f(u[k]);
                        v[j * n + i] = f(u[k]);
                        k += 1;
                    }
                }
                SimilarityMatrix::new(n, v, MatrixKind::BankJaccard).unwrap()
            };
            let a = build(&ua, &|x| x);
            let b = build(&ub, &|x| x);
            if let Ok(r) = rsa(&a, &b) {
                prop_assert!((r - rsa(&b, &a).unwrap()).abs() < 1e-12);
                let ta = build(&ua, &|x| (3.0 * x).exp());
                prop_assert!((r - rsa(&ta, &b).unwrap()).abs() < 1e-12);
            }
        }
    }
}
