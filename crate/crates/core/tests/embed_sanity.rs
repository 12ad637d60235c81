use kgfq_core::embed::{link_prediction_eval, train_embeddings, EmbedTrainConfig, EmbeddingTable, Family, LinkPredictionReport};
use kgfq_core::rng::substream;
use kgfq_core::synth;

/// Expected hits@10 and MRR when the true tail's rank is uniform over its
/// candidates, averaged over the queries of `report`.
fn random_expectation(report: &LinkPredictionReport) -> (f64, f64) {
    let n = report.queries.len() as f64;
    let mut hits = 0.0;
    let mut mrr = 0.0;
    for q in &report.queries {
        let m = q.candidates;
        hits += m.min(10) as f64 / m as f64;
        mrr += (1..=m).map(|k| 1.0 / k as f64).sum::<f64>() / m as f64;
    }
    (hits / n, mrr / n)
}

#[test]
fn trained_embeddings_beat_random_ranking() {
    let g = synth::lattice(5, 10).unwrap();
    assert_eq!(g.entities().len(), 50);
    for family in [Family::TransE, Family::TransR, Family::TransD] {
        let cfg = EmbedTrainConfig { family, dim: 16, margin: 1.0, epochs: 200, seed: 0, ..Default::default() };
        let (t, _) = train_embeddings(&g, &cfg).unwrap();
        let r = link_prediction_eval(&t, &g, g.edges()).unwrap();
        let (hits, mrr) = random_expectation(&r);
        assert!(r.hits_at_10 >= 5.0 * hits, "{family}: hits@10 {} vs baseline {hits}", r.hits_at_10);
        assert!(r.mrr >= 3.0 * mrr, "{family}: MRR {} vs baseline {mrr}", r.mrr);
        assert!(r.hits_at_10 >= r.hits_at_3 && r.hits_at_3 >= r.hits_at_1);
    }
}

#[test]
fn untrained_embeddings_match_the_random_expectation() {
    let g = synth::lattice(5, 10).unwrap();
    let mut total = 0.0;
    let mut expected = 0.0;
    let seeds = 40;
    for seed in 0..seeds {
        let cfg = EmbedTrainConfig { dim: 16, seed, ..Default::default() };
        let t = EmbeddingTable::init(&g, &cfg, &mut substream(seed, "untrained")).unwrap();
        let r = link_prediction_eval(&t, &g, g.edges()).unwrap();
        total += r.mrr;
        expected += random_expectation(&r).1;
    }
    let (mean, want) = (total / seeds as f64, expected / seeds as f64);
    assert!((mean - want).abs() < 0.5 * want, "MRR {mean} vs expectation {want}");
}
