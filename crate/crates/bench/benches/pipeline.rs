use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use lemaug::corpus::RawCorpus;
use lemaug::encoding::{build_vocab, encode_example, EncodedExample};
use lemaug::harvest::harvest_first_n;
use lemaug::model::{Batch, Lemmatizer, ModelConfig, Trainer, TrainingSchedule};
use lemaug::synth::{gen_corpus, gen_paradigms, SynthConfig};
use lemaug::treebank::{all_tokens, AnnotatedSentence};
use lemaug::unimorph::unambiguous_pairs;
use lemaug::ContextualExample;

fn corpus() -> (lemaug::synth::SynthLanguage, Vec<AnnotatedSentence>) {
    let cfg = SynthConfig {
        corpus_size: 3000,
        ..SynthConfig::default()
    };
    let language = gen_paradigms(&cfg).unwrap();
    let corpus = gen_corpus(&language, &cfg);
    (language, corpus)
}

fn examples(corpus: &[AnnotatedSentence], n: usize) -> Vec<ContextualExample> {
    all_tokens(corpus).into_iter().take(n).collect()
}

fn model_config(width: usize) -> ModelConfig {
    ModelConfig {
        embed_dim: 32,
        hidden_dim: 64,
        context_width: width,
        max_target_len: 16,
        ..ModelConfig::default()
    }
}

fn bench_data(c: &mut Criterion) {
    let (language, corpus) = corpus();
    let ex = examples(&corpus, 2000);
    c.bench_function("encode 2000 examples, 20 context symbols", |b| {
        b.iter(|| {
            ex.iter()
                .map(|e| encode_example(black_box(e), 20))
                .collect::<Vec<_>>()
        })
    });
    let raw = RawCorpus {
        sentences: corpus.iter().map(AnnotatedSentence::forms).collect(),
        provenance: Vec::new(),
    };
    let pairs = unambiguous_pairs(&language.lexicon);
    c.bench_function("harvest 1000 types from 3000 sentences", |b| {
        b.iter(|| harvest_first_n(black_box(&raw), &pairs, 1000))
    });
}

fn encoded(width: usize, n: usize) -> Vec<EncodedExample> {
    let (_, corpus) = corpus();
    examples(&corpus, n)
        .iter()
        .map(|e| encode_example(e, width))
        .collect()
}

fn bench_training(c: &mut Criterion) {
    for width in [0, 20] {
        let data = encoded(width, 32);
        let vocab = build_vocab(&data).unwrap();
        let lemmatizer = Lemmatizer::new(model_config(width), vocab.clone()).unwrap();
        let sources: Vec<Vec<usize>> = data.iter().map(|e| vocab.source_ids(&e.source)).collect();
        let targets: Vec<Vec<usize>> = data.iter().map(|e| vocab.target_ids(&e.target)).collect();
        let batch = Batch::new(&sources, &targets).unwrap();
        c.bench_function(
            &format!("forward and backward, batch 32, width {width}"),
            |b| b.iter(|| lemmatizer.params.loss_and_gradient(black_box(&batch))),
        );
    }

    let data = encoded(0, 256);
    let optimizer = TrainingSchedule::for_train_size(data.len()).optimizer;
    c.bench_function("training epoch, 256 examples, no context", |b| {
        b.iter_batched(
            || Trainer::new(model_config(0), &data, optimizer.clone(), 1, 1).unwrap(),
            |mut t| t.run_epoch().unwrap(),
            BatchSize::LargeInput,
        )
    });
}

fn bench_decoding(c: &mut Criterion) {
    let data = encoded(20, 64);
    let vocab = build_vocab(&data).unwrap();
    let sources: Vec<Vec<String>> = data.iter().map(|e| e.source.clone()).collect();
    for beam in [1, 4] {
        let mut lemmatizer = Lemmatizer::new(model_config(20), vocab.clone()).unwrap();
        lemmatizer.config.beam_width = beam;
        c.bench_function(&format!("decode 64 sources, beam {beam}"), |b| {
            b.iter(|| lemmatizer.predict_symbols(black_box(&sources), 1).unwrap())
        });
    }
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_data, bench_training, bench_decoding
}
criterion_main!(benches);
