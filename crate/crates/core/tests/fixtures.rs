use neural_core::attention::aggregate_salience;
use neural_core::fixtures::{generate_corpus, CorpusConfig, FixtureError, FINDING_LABEL};
use neural_core::graphs::fnv1a64;
use neural_core::pruning::prune_topk;
use neural_core::SyntheticStudy;

fn serialized(corpus: &[SyntheticStudy]) -> Vec<u8> {
    let mut out = Vec::new();
    for s in corpus {
        out.extend_from_slice(s.id.as_bytes());
        out.extend(s.image.to_pgm());
        out.extend(s.attention.to_bytes());
        out.extend(serde_json::to_vec(&s.kg).unwrap());
        out.push(u8::from(s.label));
    }
    out
}

#[test]
fn positives_are_exact() {
    let mut cfg = CorpusConfig::new(2024, 1000);
    cfg.image_size = 16;
    let corpus = generate_corpus::<f64>(&cfg).unwrap();
    assert_eq!(corpus.iter().filter(|s| s.label).count(), 150);
    for s in &corpus {
        assert_eq!(s.label, s.kg.entities.iter().any(|e| e.label == FINDING_LABEL));
        assert_eq!(s.label, !s.planted.is_empty());
    }
}

#[test]
fn same_seed_same_corpus() {
    let cfg = CorpusConfig::new(9, 30);
    let a = generate_corpus::<f64>(&cfg).unwrap();
    assert_eq!(serialized(&a), serialized(&generate_corpus::<f64>(&cfg).unwrap()));
    let other = generate_corpus::<f64>(&CorpusConfig::new(10, 30)).unwrap();
    assert_ne!(serialized(&a), serialized(&other));
}

#[test]
fn golden_corpus_hash() {
    let mut cfg = CorpusConfig::new(2024, 20);
    cfg.image_size = 32;
    let corpus = generate_corpus::<f64>(&cfg).unwrap();
    let hash = fnv1a64(&serialized(&corpus));
    assert_eq!(hash, 0x6a81_1352_9154_32b6, "generator output changed");
}

#[test]
fn planted_patches_survive_pruning() {
    let corpus = generate_corpus::<f64>(&CorpusConfig::new(2024, 400)).unwrap();
    let mut recovered = Vec::new();
    for s in corpus.iter().filter(|s| s.label) {
        let kept = prune_topk(&aggregate_salience(&s.attention), 0.05).unwrap();
        let hits = s.planted.iter().filter(|p| kept.retained().contains(p)).count();
        recovered.push(hits as f64 / s.planted.len() as f64);
    }
    let mean = recovered.iter().sum::<f64>() / recovered.len() as f64;
    assert!(mean >= 0.8, "{mean}");
}

#[test]
fn images_survive_pgm_roundtrip() {
    for s in generate_corpus::<f64>(&CorpusConfig::new(4, 10)).unwrap() {
        assert_eq!(neural_core::GrayImage::from_pgm(&s.image.to_pgm()).unwrap(), s.image);
    }
}

#[test]
fn rejects_bad_rates() {
    let mut cfg = CorpusConfig::new(1, 100);
    cfg.positive_rate = 1.5;
    assert_eq!(generate_corpus::<f64>(&cfg).unwrap_err(), FixtureError::InvalidRate(1.5));
}
