use std::io::Cursor;

use bankbench::embeddings::{
    concat_history, embed_doc, load_embedding_table, parse_embedding_table, train_skipgram, write_embedding_table, SkipGramConfig,
    SkipGramModel, WordVectors,
};
use bankbench::textprep::{build_vocab, TokenizedDoc};
use bankbench::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Background documents over 200 filler words; a third of them also carry
/// a sentence drawn from the 5 topic words.
fn topic_corpus(seed: u64) -> Vec<TokenizedDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..600)
        .map(|d| {
            let mut toks: Vec<String> = (0..40).map(|_| format!("f{}", rng.random_range(0..200))).collect();
            if d % 3 == 0 {
                let at = rng.random_range(0..toks.len());
                for k in 0..6 {
                    toks.insert(at + k, format!("topic{}", rng.random_range(0..5)));
                }
            }
            TokenizedDoc::new(toks)
        })
        .collect()
}

fn config() -> SkipGramConfig {
    SkipGramConfig { dim: 24, window: 3, negatives: 5, epochs: 5, lr: 0.025, seed: 9 }
}

#[test]
fn cooccurring_words_end_up_close() {
    let docs = topic_corpus(1);
    let vocab = build_vocab(&docs, 10_000);
    let (model, _) = train_skipgram::<f64>(&docs, &vocab, &config()).unwrap();
    let topic: Vec<String> = (0..5).map(|i| format!("topic{i}")).collect();
    let mut topic_cos = Vec::new();
    for a in 0..5 {
        for b in a + 1..5 {
            topic_cos.push(model.cosine(&topic[a], &topic[b]).unwrap());
        }
    }
    let mut background = Vec::new();
    for a in 0..60 {
        for b in a + 1..60 {
            background.push(model.cosine(&format!("f{a}"), &format!("f{b}")).unwrap());
        }
    }
    background.sort_by(f64::total_cmp);
    let p95 = background[(background.len() as f64 * 0.95) as usize];
    let mean_topic = topic_cos.iter().sum::<f64>() / topic_cos.len() as f64;
    assert!(mean_topic > p95, "topic {mean_topic} vs background p95 {p95}");
}

#[test]
fn epoch_losses_do_not_increase() {
    let docs = topic_corpus(2);
    let vocab = build_vocab(&docs, 10_000);
    let (_, trace) = train_skipgram::<f64>(&docs, &vocab, &config()).unwrap();
    assert_eq!(trace.epoch_losses.len(), 5);
    // Negative sampling is stochastic: allow 1% per epoch.
    assert!(trace.epoch_losses.windows(2).all(|w| w[1] <= w[0] * 1.01), "{:?}", trace.epoch_losses);
    assert!(trace.epoch_losses[4] < trace.epoch_losses[0]);
}

#[test]
fn training_is_deterministic_and_f32_tracks_f64() {
    let docs = topic_corpus(3);
    let vocab = build_vocab(&docs, 10_000);
    let cfg = SkipGramConfig { epochs: 1, ..config() };
    let (a, _) = train_skipgram::<f64>(&docs, &vocab, &cfg).unwrap();
    let (b, _) = train_skipgram::<f64>(&docs, &vocab, &cfg).unwrap();
    assert_eq!(a, b);
    let (c, _) = train_skipgram::<f32>(&docs, &vocab, &cfg).unwrap();
    let diff = (0..vocab.len())
        .flat_map(|i| a.input_vector(i).iter().zip(c.input_vector(i)).map(|(x, y)| (x - *y as f64).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    assert!(diff < 1e-3, "{diff}");
}

#[test]
fn vec_file_embeds_like_the_model() {
    let docs = topic_corpus(4);
    let vocab = build_vocab(&docs, 10_000);
    let (model, _) = train_skipgram::<f64>(&docs, &vocab, &SkipGramConfig { epochs: 1, ..config() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.vec");
    model.write_vec(&path).unwrap();
    let wv = WordVectors::<f64>::read_vec(&path).unwrap();
    let doc = TokenizedDoc::new(vec!["f1".into(), "topic2".into(), "neverseen".into()]);
    let a = embed_doc(&doc, &model).vector;
    let b = wv.embed(&doc).vector;
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
}

#[test]
fn doc_embedding_weights_tokens_by_multiplicity() {
    let vocab = build_vocab(&topic_corpus(7), 10_000);
    let model = SkipGramModel::<f64>::initialize(vocab, 8, 5);
    let doc = TokenizedDoc::new(vec!["f1".into(), "f2".into(), "f1".into()]);
    let got = embed_doc(&doc, &model).vector;
    let (a, b) = (model.vector("f1").unwrap(), model.vector("f2").unwrap());
    for k in 0..8 {
        assert!((got[k] - (2.0 * a[k] + b[k]) / 3.0).abs() < 1e-15);
    }
}

#[test]
fn history_concatenation_dims() {
    let vocab = build_vocab(&topic_corpus(5), 10_000);
    let model = SkipGramModel::<f64>::initialize(vocab, 100, 1);
    let doc = TokenizedDoc::new(vec!["f3".into()]);
    let one = concat_history(&[embed_doc(&doc, &model)]).unwrap();
    let three = concat_history(&[embed_doc(&doc, &model), embed_doc(&doc, &model), embed_doc(&doc, &model)]).unwrap();
    assert_eq!((one.len(), three.len()), (100, 300));
}

#[test]
fn embedding_table_round_trip_and_errors() {
    let text = "dim=3\n0000001:2019:0\t0.5\t-1\t2\n0000002:2019:0\t0\t0\t0\n";
    let table = parse_embedding_table::<f64, _>(Cursor::new(text)).unwrap();
    assert_eq!((table.dim, table.len()), (3, 2));
    assert_eq!(table.get("0000001:2019:0").unwrap().vector, vec![0.5, -1.0, 2.0]);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("doc_embeddings.tsv");
    write_embedding_table(&path, &table).unwrap();
    assert_eq!(load_embedding_table::<f64>(&path).unwrap(), table);

    for (bad, row) in [
        ("dim=3\na\t1\t2\n", 2),
        ("dim=2\na\t1\t2\na\t3\t4\n", 3),
        ("dim=2\na\t1\tNaN\n", 2),
        ("dim=2\na\t1\tinf\n", 2),
    ] {
        match parse_embedding_table::<f64, _>(Cursor::new(bad)) {
            Err(Error::EmbeddingTable { row: r, .. }) => assert_eq!(r, row, "{bad:?}"),
            other => panic!("{bad:?}: {other:?}"),
        }
    }
}

proptest! {
    #[test]
    fn doc_embedding_ignores_token_order(ids in prop::collection::vec(0usize..50, 1..40), seed in any::<u64>()) {
        let vocab = build_vocab(&topic_corpus(6), 10_000);
        let model = SkipGramModel::<f64>::initialize(vocab, 8, 2);
        let toks: Vec<String> = ids.iter().map(|i| format!("f{i}")).collect();
        let mut shuffled = toks.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = embed_doc(&TokenizedDoc::new(toks), &model).vector;
        let b = embed_doc(&TokenizedDoc::new(shuffled), &model).vector;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
