use induction_core::classifier::{read_checkpoint, write_checkpoint, ModelConfig, ModelParams};
use induction_core::corpus::{generate_taxonomic_bank, TaxonomySpec};
use induction_core::geometry::{dynamics_geometry_report, generalization_matrix};
use induction_core::induction::{parse_records, run_experiment, singleton_sets, write_records, InductionConfig};
use induction_core::phenomena::{similarity_effect, typicality_effect};
use induction_core::pretrain::{pretrain, TrainConfig};

#[test]
fn analyses_replay_from_saved_records_and_checkpoint() {
    let (bank, tax) = generate_taxonomic_bank(&TaxonomySpec::default()).unwrap();
    let params = ModelParams::init(&bank, &ModelConfig::default()).unwrap();
    let (trained, log) = pretrain(&params, &bank, &TrainConfig::default()).unwrap();
    assert!(log.final_accuracy >= 0.99);

    let (nb, nonce) = bank.mint_nonce("queem").unwrap();
    let checkpoint = write_checkpoint(&trained, &bank).unwrap();
    let records = run_experiment(&trained, &nb, nonce, &singleton_sets(&nb), &InductionConfig::default()).unwrap();
    assert_eq!(
        write_checkpoint(&trained, &bank).unwrap(),
        checkpoint,
        "snapshot changed"
    );

    for r in records.iter().filter(|r| r.trace.reached()) {
        assert!(r.trace.losses.last() < r.trace.losses.first() || r.trace.losses.len() == 1);
        assert!(r.premises.iter().all(|c| r.scores[c.index()] >= 0.9));
    }

    let files = write_records(&records, &nb).unwrap();
    let replayed = parse_records(&files, &nb).unwrap();
    let restored = read_checkpoint(&checkpoint, &bank).unwrap();

    let n = nb.num_concepts();
    let sim = |rs| {
        similarity_effect(&generalization_matrix(rs, n).unwrap(), &nb)
            .unwrap()
            .detail_csv()
    };
    assert_eq!(sim(&records), sim(&replayed));
    let typ = |rs| typicality_effect(rs, &nb, &tax, tax.root()).unwrap().detail_csv();
    assert_eq!(typ(&records), typ(&replayed));
    assert_eq!(
        dynamics_geometry_report(&records, &trained)
            .unwrap()
            .per_premise_csv(&bank)
            .unwrap(),
        dynamics_geometry_report(&replayed, &restored)
            .unwrap()
            .per_premise_csv(&bank)
            .unwrap()
    );

    let again = run_experiment(&trained, &nb, nonce, &singleton_sets(&nb), &InductionConfig::default()).unwrap();
    assert_eq!(write_records(&again, &nb).unwrap().contents(), files.contents());
}
