mod common;

use evatlas_core::corpus::FeatureKind;
use evatlas_core::{parse_corpus, validate_corpus, IngestConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn csv(seed: u64, rows: usize) -> String {
    common::random_csv(&mut ChaCha8Rng::seed_from_u64(seed), rows)
}

proptest! {
    #[test]
    fn written_csv_reads_back_equal(seed in any::<u64>(), rows in 1usize..50) {
        let config = IngestConfig::default();
        let (a, _) = parse_corpus(&csv(seed, rows), &config).unwrap();
        let (b, _) = parse_corpus(&a.to_csv(";"), &config).unwrap();
        prop_assert_eq!(&a.studies, &b.studies);
        prop_assert_eq!(&a.schema, &b.schema);
        prop_assert_eq!(&a.corpus_id, &b.corpus_id);
    }

    #[test]
    fn line_endings_and_bom_do_not_change_identity(seed in any::<u64>(), rows in 1usize..30) {
        let text = csv(seed, rows);
        let config = IngestConfig::default();
        let (plain, _) = parse_corpus(&text, &config).unwrap();
        let (crlf, _) = parse_corpus(&text.replace('\n', "\r\n"), &config).unwrap();
        let (bom, _) = parse_corpus(&format!("\u{feff}{text}"), &config).unwrap();
        prop_assert_eq!(&plain.corpus_id, &crlf.corpus_id);
        prop_assert_eq!(&plain.corpus_id, &bom.corpus_id);
    }

    #[test]
    fn provenance_does_not_change_identity(seed in any::<u64>(), source in "[a-z]{0,12}") {
        let text = csv(seed, 10);
        let (a, _) = parse_corpus(&text, &IngestConfig::default()).unwrap();
        let config = IngestConfig { source, ingested_at: Some("2024-01-01T00:00:00Z".into()), ..IngestConfig::default() };
        let (b, _) = parse_corpus(&text, &config).unwrap();
        prop_assert_eq!(a.corpus_id, b.corpus_id);
    }

    #[test]
    fn report_matches_revalidation(seed in any::<u64>(), rows in 1usize..30) {
        let (corpus, report) = parse_corpus(&csv(seed, rows), &IngestConfig::default()).unwrap();
        let again = validate_corpus(&corpus);
        prop_assert!(again.errors.is_empty());
        prop_assert!(again.warnings.len() <= report.warnings.len());
        let unknown_years = corpus.studies.iter().filter(|s| s.year.is_none()).count();
        prop_assert_eq!(again.warnings.len(), unknown_years);
    }
}

#[test]
fn facet_cells_are_trimmed_and_matched_without_case() {
    let text = "title,authors,year,abstract,Agent Type\n\
                a,x,2001,y,  Pedagogical \n\
                b,x,2002,y,pedagogical\n\
                c,x,2003,y,Conversational  agent\n";
    let (corpus, report) = parse_corpus(text, &IngestConfig::default()).unwrap();
    assert!(report.warnings.is_empty());
    let def = corpus.feature("Agent Type").unwrap();
    assert_eq!(def.kind, FeatureKind::Categorical);
    assert_eq!(def.values, vec!["Conversational agent".to_string(), "Pedagogical".to_string()]);
    assert_eq!(corpus.studies[0].id, "S1");
}

#[test]
fn inference_thresholds_are_configurable() {
    let mut text = String::from("title,authors,year,abstract,Code\n");
    for i in 0..10 {
        text.push_str(&format!("t{i},a,2000,x,v{i}\n"));
    }
    let (corpus, _) = parse_corpus(&text, &IngestConfig::default()).unwrap();
    assert_eq!(corpus.feature("Code").unwrap().kind, FeatureKind::Categorical);

    let mut config = IngestConfig::default();
    config.thresholds.max_distinct_floor = 5;
    let (corpus, _) = parse_corpus(&text, &config).unwrap();
    assert_eq!(corpus.feature("Code").unwrap().kind, FeatureKind::FreeText);
}
