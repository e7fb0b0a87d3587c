//! Criterion benches: batch queries on the serial path vs the rayon path
//! (identical when the `parallel` feature is off), plus the single-mutator
//! update loop for reference.

use criterion::{criterion_group, criterion_main, Criterion, Throughput};

use hashdbg::rng::SplitMix64;
use hashdbg::{Alphabet, BuildConfig, DeBruijnGraph, Histogram, JumbledIndex, Kmer, RollDirection};

fn random_dna(len: usize, rng: &mut SplitMix64) -> String {
    (0..len)
        .map(|_| b"ACGT"[rng.next_below(4) as usize] as char)
        .collect()
}

fn membership_batch(c: &mut Criterion) {
    let mut rng = SplitMix64::new(1);
    let k = 15;
    let alphabet = Alphabet::dna();
    let text = random_dna(30_000, &mut rng);
    let g = DeBruijnGraph::build_static(&[text.as_str()], k, &alphabet, &BuildConfig::new(1))
        .expect("build");
    let mut queries = g.sample_node_kmers(4_096, 2);
    for _ in 0..4_096 {
        let codes: Vec<u8> = (0..k).map(|_| rng.next_below(4) as u8).collect();
        queries.push(Kmer::from_codes(&codes, &alphabet).unwrap());
    }

    let mut group = c.benchmark_group("membership_batch");
    group.throughput(Throughput::Elements(queries.len() as u64));
    group.bench_function("serial", |b| {
        b.iter(|| g.contains_batch_serial(std::hint::black_box(&queries)))
    });
    group.bench_function("parallel", |b| {
        b.iter(|| g.contains_batch(std::hint::black_box(&queries)))
    });
    group.finish();
}

fn jumbled_batch(c: &mut Criterion) {
    let mut rng = SplitMix64::new(3);
    let k = 10;
    let alphabet = Alphabet::dna();
    let text = random_dna(20_000, &mut rng);
    let idx = JumbledIndex::build(&text, k, &alphabet, 3).expect("build");
    let patterns: Vec<Histogram> = (0..8_192)
        .map(|_| {
            let mut counts = vec![0u16; 4];
            for _ in 0..k {
                counts[rng.next_below(4) as usize] += 1;
            }
            Histogram::new(counts)
        })
        .collect();

    let mut group = c.benchmark_group("jumbled_batch");
    group.throughput(Throughput::Elements(patterns.len() as u64));
    group.bench_function("serial", |b| {
        b.iter(|| idx.match_batch_serial(std::hint::black_box(&patterns)))
    });
    group.bench_function("parallel", |b| {
        b.iter(|| idx.match_batch(std::hint::black_box(&patterns)))
    });
    group.finish();
}

fn update_loop(c: &mut Criterion) {
    let alphabet = Alphabet::dna();
    let k = 15;
    let mut rng = SplitMix64::new(5);
    let kmers: Vec<Kmer> = (0..2_000)
        .map(|_| {
            let codes: Vec<u8> = (0..k).map(|_| rng.next_below(4) as u8).collect();
            Kmer::from_codes(&codes, &alphabet).unwrap()
        })
        .collect();

    c.bench_function("update_add_remove_cycle", |b| {
        b.iter(|| {
            let mut g = DeBruijnGraph::new_dynamic(k, &alphabet, 5).unwrap();
            for v in &kmers {
                g.add_node(v).unwrap();
            }
            for v in kmers.iter().take(500) {
                let w = v.rolled(RollDirection::AppendRight, 1);
                if g.is_node(&w) {
                    g.add_edge(v, &w).unwrap();
                }
            }
            for v in kmers.iter().take(500) {
                g.remove_node(v).unwrap();
            }
            g.node_count()
        })
    });
}

criterion_group!(benches, membership_batch, jumbled_batch, update_loop);
criterion_main!(benches);
