use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use langsup_core::captionops::{hash_ngrams, DEFAULT_BUCKETS};
use langsup_core::numkit::DenseMatrix;
use langsup_core::objective::{clip_batch_loss, simclr_batch_loss, ClipOptions};
use langsup_core::rng::stream;
use langsup_core::synthworld::{
    build_dataset, AugmentPolicy, CaptionKnobs, DatasetSpec, ObjectUniverse, UniverseConfig, Vocabulary,
};
use langsup_core::{ContrastiveMode, EncoderConfig, EncoderStack, Example};

fn world(n: usize) -> (ObjectUniverse, Vocabulary, Vec<Example>) {
    let u = ObjectUniverse::generate(UniverseConfig::default()).unwrap();
    let v = Vocabulary::new(&u);
    let ds = build_dataset(&DatasetSpec::new(n, 1, CaptionKnobs::default(), 1), &u).unwrap();
    (u, v, ds)
}

fn batch_losses(c: &mut Criterion) {
    let (u, vocab, ds) = world(256);
    let arch = EncoderConfig::desk(u.embed_dim(), vocab.len());
    let batch: Vec<&Example> = ds.iter().collect();
    let augment = AugmentPolicy::default().params();

    let mut simclr = EncoderStack::new(ContrastiveMode::Simclr, &arch, 0.2, 0).unwrap();
    c.bench_function("simclr_batch_loss/256", |b| {
        let mut rng = stream(0, "bench", 0);
        b.iter(|| {
            simclr.zero_grad();
            black_box(simclr_batch_loss(&batch, &augment, &mut simclr, &mut rng).unwrap())
        })
    });

    let mut clip = EncoderStack::new(ContrastiveMode::Clip, &arch, 0.2, 0).unwrap();
    let idx = vec![0; batch.len()];
    let opts = ClipOptions { augment, symmetric: true };
    c.bench_function("clip_batch_loss/256", |b| {
        let mut rng = stream(0, "bench", 1);
        b.iter(|| {
            clip.zero_grad();
            black_box(clip_batch_loss(&batch, &idx, &opts, &vocab, &mut clip, &mut rng).unwrap())
        })
    });
}

fn encoder(c: &mut Criterion) {
    let (u, vocab, ds) = world(1024);
    let arch = EncoderConfig::desk(u.embed_dim(), vocab.len());
    let stack = EncoderStack::new(ContrastiveMode::Clip, &arch, 0.2, 0).unwrap();
    let data: Vec<f64> = ds.iter().flat_map(|e| e.image.iter().copied()).collect();
    let x = DenseMatrix::from_vec(ds.len(), u.embed_dim(), data).unwrap();
    c.bench_function("image_features/1024", |b| b.iter(|| black_box(stack.image.features(&x).unwrap())));
}

fn hashing(c: &mut Criterion) {
    let (_, _, ds) = world(512);
    c.bench_function("hash_ngrams/512", |b| {
        b.iter_batched(
            || ds.iter().map(|e| e.captions[0].clone()).collect::<Vec<_>>(),
            |caps| {
                for cap in &caps {
                    black_box(hash_ngrams(cap, DEFAULT_BUCKETS).unwrap());
                }
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, batch_losses, encoder, hashing);
criterion_main!(benches);
