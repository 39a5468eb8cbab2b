//! Acceptance criteria. Each test prints one `PASS` or `FAIL` line naming
//! its criterion and then asserts it.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use fer_core::augment::{rand_augment, AugmentPolicy};
use fer_core::datasets::{
    save_manifest, split, synth_generate, DatasetManifest, ImageSample, Split, SplitRatios, Variant,
};
use fer_core::metrics::{confusion, f1_score, report, ConfusionMatrix};
use fer_core::preprocess::{
    build_augmented_merged, mask_rectangles, BoundingBox, DetectionCache, FaceDetection, LandmarkSet, MaskSize,
    Point,
};
use fer_core::rng::stream;
use fer_core::sampling::{build_sampler, class_weights, class_weights_from_labels};
use fer_core::{DatasetId, EmotionLabel, GrayFrame, NUM_CLASSES};
use fer_experiments::results::{CellOutcome, CellRecord, CellResult, TableKind};
use fer_experiments::{render, ExperimentConfig, Format, ResultsTable, Source, Stage};
use fer_nn::{Arch, Graph, Mode};
use fer_train::{epoch_order, images_to_tensor, train, ModelSpec, TrainConfig};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {n} {}: {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

#[test]
fn criterion_1_metrics_match_counting_oracle() {
    let start = Instant::now();
    let mut rng = stream(2024, &[]);
    let truth: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..NUM_CLASSES)).collect();
    let pred: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..NUM_CLASSES)).collect();
    let m = confusion(&truth, &pred).unwrap();
    let rep = report(&m).unwrap();

    let mut mismatches = Vec::new();
    for t in 0..NUM_CLASSES {
        for p in 0..NUM_CLASSES {
            let n = truth.iter().zip(&pred).filter(|&(&a, &b)| a == t && b == p).count() as u64;
            if m.get(t, p) != n {
                mismatches.push(format!("M[{t}][{p}]"));
            }
        }
    }
    for c in 0..NUM_CLASSES {
        let tp = truth.iter().zip(&pred).filter(|&(&a, &b)| a == c && b == c).count() as f64;
        let predicted = pred.iter().filter(|&&b| b == c).count() as f64;
        let actual = truth.iter().filter(|&&a| a == c).count() as f64;
        let (precision, recall) = (tp / predicted, tp / actual);
        let f1 = 2.0 * precision * recall / (precision + recall);
        let got = &rep.classes[c];
        if got.precision != precision || got.recall != recall || got.f1 != f1 || got.support != actual as u64 {
            mismatches.push(format!("class {c}"));
        }
    }
    let correct = truth.iter().zip(&pred).filter(|(a, b)| a == b).count() as f64 / 10_000.0;
    if rep.accuracy != correct {
        mismatches.push("accuracy".into());
    }
    let elapsed = start.elapsed();
    let pass = mismatches.is_empty() && elapsed < Duration::from_secs(5);
    verdict(
        1,
        "metrics oracle equivalence",
        pass,
        &format!("10000 pairs, mismatches {mismatches:?}, {:.2}s", elapsed.as_secs_f64()),
    );
    assert!(pass);
}

/// (emotion, precision, recall, reference F1) without, then with the sampler.
const PRF_TABLE: [(&str, [(f64, f64, f64); 2]); 7] = [
    ("Angry", [(0.809, 0.758, 0.782), (0.806, 0.774, 0.789)]),
    ("Disgust", [(0.800, 0.790, 0.795), (0.849, 0.816, 0.832)]),
    ("Fear", [(0.807, 0.628, 0.707), (0.845, 0.628, 0.721)]),
    ("Happy", [(0.897, 0.920, 0.908), (0.892, 0.903, 0.898)]),
    ("Neutral", [(0.806, 0.879, 0.841), (0.804, 0.862, 0.832)]),
    ("Sad", [(0.725, 0.572, 0.640), (0.677, 0.594, 0.633)]),
    ("Surprise", [(0.854, 0.837, 0.855), (0.856, 0.837, 0.846)]),
];

#[test]
fn criterion_2_reference_f1_values_follow_from_precision_and_recall() {
    let mut off = Vec::new();
    for (name, rows) in PRF_TABLE {
        for (i, (p, r, f1)) in rows.into_iter().enumerate() {
            let got = f1_score(p, r);
            if (got - f1).abs() > 0.001 {
                let sampler = if i == 0 { "without" } else { "with" };
                off.push(format!("{name} {sampler} sampler: {got:.4} vs {f1}"));
            }
        }
    }
    let pass = off.is_empty();
    verdict(
        2,
        "F1 consistency of the 14 reference rows (tolerance 0.001)",
        pass,
        &format!("{} of 14 rows reproduce; off: {off:?}", 14 - off.len()),
    );
    assert!(pass, "{off:?}");
}

#[test]
fn criterion_3_sampler_balances_and_agrees_with_cumulative_oracle() {
    let start = Instant::now();
    let classes = [EmotionLabel::Angry, EmotionLabel::Disgust, EmotionLabel::Fear];
    let sizes = [1000usize, 100, 10];
    let labels: Vec<EmotionLabel> = classes
        .iter()
        .zip(sizes)
        .flat_map(|(&l, n)| std::iter::repeat_n(l, n))
        .collect();
    let weights = class_weights_from_labels(&labels).unwrap();
    let sampler = build_sampler(&labels, &weights, 7).unwrap();
    let draws = 210_000;

    let class_of = |i: usize| classes.iter().position(|&l| l == labels[i]).unwrap();
    let mut alias = [0u64; 3];
    for i in sampler.draw(draws, &mut stream(7, &[1])) {
        alias[class_of(i)] += 1;
    }
    // inverse-CDF oracle over the same per-sample probabilities
    let cumulative: Vec<f64> = sampler
        .probabilities()
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let mut oracle = [0u64; 3];
    let mut rng = stream(7, &[2]);
    for _ in 0..draws {
        let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
        let i = cumulative.partition_point(|&c| c <= u).min(labels.len() - 1);
        oracle[class_of(i)] += 1;
    }

    let freqs: Vec<f64> = alias.iter().map(|&n| n as f64 / draws as f64).collect();
    let balanced = freqs.iter().all(|f| (f - 1.0 / 3.0).abs() <= 0.02);
    // two-sample chi-square homogeneity test on the 2×3 class-count table
    let mut stat = 0.0;
    for c in 0..3 {
        let col = (alias[c] + oracle[c]) as f64;
        for row in [alias[c], oracle[c]] {
            let expected = col / 2.0;
            stat += (row as f64 - expected).powi(2) / expected;
        }
    }
    let p_value = 1.0 - ChiSquared::new(2.0).unwrap().cdf(stat);
    let elapsed = start.elapsed();
    let pass = balanced && p_value > 0.01 && elapsed < Duration::from_secs(10);
    verdict(
        3,
        "sampler balance on counts (1000, 100, 10)",
        pass,
        &format!(
            "frequencies {:.4}/{:.4}/{:.4}, chi2 {stat:.3} p {p_value:.3}, {:.2}s",
            freqs[0],
            freqs[1],
            freqs[2],
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

/// Merged class counts in canonical label order.
const MERGED_COUNTS: [usize; 7] = [3665, 845, 1314, 9982, 13325, 4873, 5130];

#[test]
fn criterion_4_exact_sampler_identities() {
    let weights = class_weights(&MERGED_COUNTS).unwrap();
    let total = weights.total();
    let identity_err = weights
        .iter()
        .map(|(l, w)| (w * MERGED_COUNTS[l.index()] as f64 - total as f64).abs())
        .fold(0.0, f64::max);
    let disgust = weights.get(EmotionLabel::Disgust).unwrap();

    let labels: Vec<EmotionLabel> = EmotionLabel::ALL
        .iter()
        .zip(MERGED_COUNTS)
        .flat_map(|(&l, n)| std::iter::repeat_n(l, n))
        .collect();
    let sampler = build_sampler(&labels, &weights, 0).unwrap();
    let mut mass = [0.0f64; NUM_CLASSES];
    for (l, p) in labels.iter().zip(sampler.probabilities()) {
        mass[l.index()] += p;
    }
    let spread = mass.iter().cloned().fold(f64::MIN, f64::max) - mass.iter().cloned().fold(f64::MAX, f64::min);
    let pass = total == 39_134 && spread <= 1e-12 && identity_err <= 1e-9 && (disgust - 46.312).abs() < 0.0005;
    verdict(
        4,
        "exact sampler identities on the merged counts",
        pass,
        &format!("class mass spread {spread:.2e}, max |w·n − N| {identity_err:.2e}, Disgust weight {disgust:.4}"),
    );
    assert!(pass);
}

fn kept(centers: &[(usize, usize)]) -> usize {
    let f = mask_rectangles(&GrayFrame::filled(48, 48, 255), centers, MaskSize::default());
    f.data().iter().filter(|&&v| v != 0).count()
}

#[test]
fn criterion_5_mask_geometry() {
    // oracle: a 10 wide, 14 tall box starting half an extent before the center
    let span = |center: usize, extent: usize| {
        let start = center as i64 - extent as i64 / 2;
        (start.max(0)..(start + extent as i64).min(48)).count()
    };
    let mut wrong = Vec::new();
    let mut interior = 0;
    for r in 0..48 {
        for c in 0..48 {
            let expected = span(r, 14) * span(c, 10);
            let got = kept(&[(r, c)]);
            if got != expected {
                wrong.push((r, c, got, expected));
            }
            if (7..=41).contains(&r) && (5..=43).contains(&c) {
                interior += 1;
                if got != 140 {
                    wrong.push((r, c, got, 140));
                }
            }
        }
    }
    let five = kept(&[(8, 6), (8, 40), (24, 24), (40, 6), (40, 40)]);
    let corner = kept(&[(0, 0)]);
    let pass = wrong.is_empty() && five == 700 && corner == 35;
    verdict(
        5,
        "mask geometry on 48x48",
        pass,
        &format!(
            "{interior} interior centers keep 140, 2304 centers match the clipped-box oracle ({} wrong), five disjoint keep {five}, corner keeps {corner}",
            wrong.len()
        ),
    );
    assert!(pass);
}

fn merged_corpus() -> DatasetManifest {
    let per_source: [(DatasetId, [usize; 7]); 3] = [
        (DatasetId::Ferplus, [3110, 248, 819, 9355, 12905, 4370, 4462]),
        (DatasetId::Ckplus, [135, 177, 75, 207, 0, 84, 249]),
        (DatasetId::Kdef, [420, 420, 420, 420, 420, 419, 419]),
    ];
    let pixels = GrayFrame::filled(48, 48, 0);
    let mut samples = Vec::with_capacity(39_134);
    for (source, counts) in per_source {
        for (label, n) in EmotionLabel::ALL.into_iter().zip(counts) {
            for i in 0..n {
                samples.push(ImageSample {
                    pixels: pixels.clone(),
                    label,
                    source,
                    source_key: format!("{label}-{i}"),
                    variant: Variant::Original,
                    split: Split::Unassigned,
                });
            }
        }
    }
    DatasetManifest::from_samples(samples).unwrap()
}

fn leaked_groups(m: &DatasetManifest) -> usize {
    let mut splits: BTreeMap<String, BTreeSet<Split>> = BTreeMap::new();
    for s in m.samples() {
        splits.entry(s.group_id()).or_default().insert(s.split);
    }
    splits.values().filter(|s| s.len() > 1).count()
}

#[test]
fn criterion_6_split_contract() {
    let corpus = merged_corpus();
    let assigned = split(&corpus, SplitRatios::default(), 0).unwrap();
    let sizes = assigned.split_sizes();
    let got = [Split::Train, Split::Val, Split::Test].map(|s| sizes.get(&s).copied().unwrap_or(0));
    let stated = [31_307usize, 3_913, 3_914];
    let sizes_ok = got.iter().zip(stated).all(|(&g, s)| g.abs_diff(s) <= 1) && got.iter().sum::<usize>() == 39_134;

    // augmented merged manifests under several seeds and detection patterns
    let mut leaks = 0;
    let mut checked = 0;
    for seed in 0..5u64 {
        let m = split(&synth_generate(12, seed), SplitRatios::default(), seed).unwrap();
        let mut cache = DetectionCache::new();
        for (i, s) in m.samples().iter().enumerate() {
            let det = (i % 7 != 0).then_some(FaceDetection {
                bbox: BoundingBox {
                    x: 2.0,
                    y: 2.0,
                    w: 44.0,
                    h: 44.0,
                },
                landmarks: (i % 5 != 0).then(|| {
                    LandmarkSet::from_points([
                        Point::new(16.0, 18.0),
                        Point::new(32.0, 18.0),
                        Point::new(24.0, 26.0),
                        Point::new(18.0, 34.0),
                        Point::new(30.0, 34.0),
                    ])
                }),
                confidence: 0.9,
            });
            cache.insert(s.source, &s.source_key, det);
        }
        let (merged, _) = build_augmented_merged(&m, &cache, MaskSize::default()).unwrap();
        leaks += leaked_groups(&merged);
        checked += merged.groups().len();
    }
    let pass = sizes_ok && leaks == 0;
    verdict(
        6,
        "split contract",
        pass,
        &format!(
            "39134 records split {}/{}/{} (stated {}/{}/{} within 1), {leaks} of {checked} augmented-merged groups span splits",
            got[0], got[1], got[2], stated[0], stated[1], stated[2]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_desk_scale_training_smoke_test() {
    let start = Instant::now();
    let corpus = split(&synth_generate(100, 0), SplitRatios::default(), 0).unwrap();
    let config = TrainConfig {
        epochs: 20,
        patience: 5,
        ..TrainConfig::default()
    };
    let spec = ModelSpec::new(Arch::Resnet18);

    let model = spec.build(config.seed).unwrap();
    let train_samples: Vec<&ImageSample> = corpus.samples().iter().filter(|s| s.split == Split::Train).take(512).collect();
    let mut total = 0.0;
    for chunk in train_samples.chunks(64) {
        let frames: Vec<&GrayFrame> = chunk.iter().map(|s| &s.pixels).collect();
        let labels: Vec<usize> = chunk.iter().map(|s| s.label.index()).collect();
        let mut g = Graph::new(model.params(), Mode::Train);
        let x = g.input(images_to_tensor(&frames).unwrap());
        let logits = model.forward(&mut g, x);
        let loss = g.cross_entropy(logits, &labels);
        total += g.value(loss).data()[0] as f64 * chunk.len() as f64;
    }
    let initial = total / train_samples.len() as f64;

    let outcome = train(&corpus, &spec, &config).unwrap();
    let best = outcome.checkpoint.val_accuracy;
    let elapsed = start.elapsed();
    let pass = best >= 0.95
        && (initial - 1.9459).abs() <= 0.15
        && outcome.logs.len() <= 20
        && elapsed < Duration::from_secs(600);
    verdict(
        7,
        "desk-scale resnet18 smoke test",
        pass,
        &format!(
            "initial loss {initial:.4}, best val accuracy {best:.4} at epoch {} of {}, {:.0}s",
            outcome.checkpoint.epoch,
            outcome.logs.len(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

fn table_from(m: &ConfusionMatrix) -> ResultsTable {
    let cell = CellRecord {
        table: TableKind::Ablation,
        row: "resnet18".into(),
        column: "aligned".into(),
        arch: Arch::Resnet18,
        stage: Stage::Aligned,
        train_source: Source::Merged,
        test_source: Source::Merged,
        augment: false,
        sampler: false,
        seed: 0,
        outcome: CellOutcome::Ok(Box::new(CellResult {
            accuracy: m.accuracy(),
            confusion: m.clone(),
            report: report(m).unwrap(),
            run_id: "0".repeat(16),
            checkpoint: "runs/0/best.ckpt".into(),
            manifest_fingerprint: "a".repeat(64),
            test_fingerprint: "b".repeat(64),
            best_epoch: 1,
            val_accuracy: 1.0,
        })),
    };
    ResultsTable { cells: vec![cell] }
}

#[test]
fn criterion_8_determinism() {
    let mut checks = Vec::new();

    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let manifest_bytes: Vec<Vec<u8>> = dirs
        .iter()
        .map(|d| {
            let m = split(&synth_generate(20, 4), SplitRatios::default(), 9).unwrap();
            let path = d.path().join("m.csv");
            save_manifest(&m, &path).unwrap();
            std::fs::read(path).unwrap()
        })
        .collect();
    checks.push(("manifests", manifest_bytes[0] == manifest_bytes[1]));

    let policy = AugmentPolicy::new(2, 9).unwrap();
    let img = synth_generate(1, 0).samples()[0].pixels.clone();
    let augmented = |pos: u64| -> Vec<GrayFrame> {
        (0..50).map(|e| rand_augment(&img, &policy, &mut stream(5, &[3, e, pos]))).collect()
    };
    checks.push(("augmentation streams", augmented(1) == augmented(1) && augmented(1) != augmented(2)));

    let labels: Vec<EmotionLabel> = synth_generate(30, 1).samples().iter().map(|s| s.label).collect();
    let weights = class_weights_from_labels(&labels).unwrap();
    let draws = |seed| build_sampler(&labels, &weights, seed).unwrap().draw_epoch(3);
    let config = TrainConfig {
        weighted_sampler: true,
        ..TrainConfig::default()
    };
    let sampler = build_sampler(&labels, &weights, config.sampler_seed()).unwrap();
    let orders = |c: &TrainConfig| epoch_order(labels.len(), c, Some(&sampler), 2);
    checks.push((
        "draw sequences",
        draws(11) == draws(11) && draws(11) != draws(12) && orders(&config) == orders(&config),
    ));

    let mut rng = stream(8, &[]);
    let truth: Vec<usize> = (0..500).map(|_| rng.random_range(0..NUM_CLASSES)).collect();
    let pred: Vec<usize> = truth.iter().map(|&t| if rng.random_bool(0.7) { t } else { rng.random_range(0..NUM_CLASSES) }).collect();
    let table = table_from(&confusion(&truth, &pred).unwrap());
    let rendered: Vec<Vec<Vec<u8>>> = dirs
        .iter()
        .map(|d| {
            render(&table, Format::All, &d.path().join("out"))
                .unwrap()
                .iter()
                .map(|p| std::fs::read(p).unwrap())
                .collect()
        })
        .collect();
    checks.push(("rendered reports", rendered[0] == rendered[1]));

    let pass = checks.iter().all(|(_, ok)| *ok);
    let detail: Vec<String> = checks
        .iter()
        .map(|(name, ok)| format!("{name} {}", if *ok { "identical" } else { "DIFFER" }))
        .collect();
    verdict(8, "determinism", pass, &detail.join(", "));
    assert!(pass);
}

/// Runs only when `FER_FULL_CONFIG` names an experiment config over the
/// three licensed datasets; the run takes days on a CPU.
#[test]
fn criterion_9_full_scale_reproduction() {
    let Some(path) = std::env::var_os("FER_FULL_CONFIG") else {
        println!("criterion 9 SKIP: full-scale reproduction: FER_FULL_CONFIG is not set, so the licensed datasets are not provisioned");
        return;
    };
    let mut cfg = ExperimentConfig::load(std::path::Path::new(&path)).unwrap();
    for stage in [Stage::Original, Stage::Aligned] {
        if !cfg.manifest_path(stage).exists() {
            fer_experiments::pipeline::ingest(&cfg).unwrap();
            fer_experiments::pipeline::preprocess(&cfg).unwrap();
        }
    }
    cfg.ablation = Some(fer_experiments::config::AblationConfig {
        stages: vec![Stage::Original, Stage::Aligned],
        ..Default::default()
    });
    let table = fer_experiments::run_ablation_grid(&cfg, 1).unwrap();
    let acc = |arch: Arch, stage: Stage| table.cell(arch.as_str(), stage.as_str()).and_then(|c| c.result()).map(|r| r.accuracy);
    let gains = Arch::ALL
        .iter()
        .filter(|&&a| matches!((acc(a, Stage::Original), acc(a, Stage::Aligned)), (Some(o), Some(al)) if al > o))
        .count();

    cfg.ablation = Some(fer_experiments::config::AblationConfig {
        architectures: vec![Arch::Densenet121],
        stages: vec![Stage::Aligned],
        flags: vec![fer_experiments::Flags {
            augment: true,
            sampler: false,
        }],
        ..Default::default()
    });
    let dense = fer_experiments::run_ablation_grid(&cfg, 1).unwrap();
    let dense_acc = dense.cells[0].result().map(|r| r.accuracy).unwrap_or(0.0);
    let pass = dense_acc >= 0.79 && gains >= 4;
    verdict(
        9,
        "full-scale reproduction",
        pass,
        &format!("densenet121 + augmentation on aligned merged {:.2}%, alignment gain on {gains} of 5 backbones", dense_acc * 100.0),
    );
    assert!(pass);
}
