use kgfq_core::corpus::{build_corpus, SplitRatios};
use kgfq_core::embed::{train_embeddings, EmbedTrainConfig, Family};
use kgfq_core::nn::TrainConfig;
use kgfq_core::selection::{evaluate, train_selector, SelectionInputs, Variant};
use kgfq_core::synth;

#[test]
fn selectors_learn_the_synthetic_cue() {
    let w = synth::world(7, 12).unwrap();
    let loaded = build_corpus(synth::corpus(&w, 600, 8), &w.graph, &SplitRatios::default()).unwrap();
    let (emb, _) = train_embeddings(&w.graph, &EmbedTrainConfig { family: Family::TransE, dim: 16, epochs: 100, ..Default::default() }).unwrap();
    let inputs = SelectionInputs { graph: &w.graph, embeddings: &emb, contexts: None };
    let cfg = TrainConfig { epochs: 30, ..TrainConfig::desk() };
    for variant in [Variant::Mlp, Variant::Attention] {
        let (model, log) = train_selector(&loaded.split, &inputs, &cfg, variant).unwrap();
        let r = evaluate(&model, &loaded.split.test, &inputs, &[1, 3, 5]).unwrap();
        eprintln!("{variant}: best epoch {} {:?}", log.best_epoch, r);
        let r1 = r[0].1;
        assert!(r1.entity >= 0.9, "{variant} entity R@1 {}", r1.entity);
    }
}
