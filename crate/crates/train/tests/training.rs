use fer_core::datasets::{split, synth_generate, DatasetManifest, ImageSample, Split, SplitRatios};
use fer_core::sampling::{build_sampler, class_weights_from_labels};
use fer_core::{EmotionLabel, GrayFrame};
use fer_nn::{Arch, Graph, Mode};
use fer_train::{
    epoch_order, evaluate, images_to_tensor, predict, predict_model, train, Checkpoint, EpochLog, ModelSpec,
    TrainConfig, TrainError,
};

fn corpus(per_class: usize, seed: u64) -> DatasetManifest {
    split(&synth_generate(per_class, seed), SplitRatios::default(), seed).unwrap()
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 32,
        seed: 3,
        ..TrainConfig::default()
    }
}

fn without_time(logs: &[EpochLog]) -> Vec<EpochLog> {
    logs.iter()
        .map(|l| EpochLog {
            wall_time_s: 0.0,
            ..l.clone()
        })
        .collect()
}

fn split_samples(m: &DatasetManifest, s: Split) -> Vec<&ImageSample> {
    m.indices(s).into_iter().map(|i| &m.samples()[i]).collect()
}

#[test]
fn identical_seed_gives_identical_epoch_logs() {
    let m = corpus(10, 1);
    let config = TrainConfig {
        augment: true,
        weighted_sampler: true,
        ..quick(2)
    };
    let spec = ModelSpec::new(Arch::Resnet18);
    let a = train(&m, &spec, &config).unwrap();
    let b = train(&m, &spec, &config).unwrap();
    assert_eq!(without_time(&a.logs), without_time(&b.logs));
    assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
    let other = train(&m, &spec, &TrainConfig { seed: 4, ..config }).unwrap();
    assert_ne!(without_time(&a.logs), without_time(&other.logs));
}

#[test]
fn zero_learning_rate_stops_at_second_epoch_with_patience_one() {
    let m = corpus(10, 2);
    let config = TrainConfig {
        learning_rate: 0.0,
        patience: 1,
        ..quick(10)
    };
    let out = train(&m, &ModelSpec::new(Arch::Resnet18), &config).unwrap();
    let epochs: Vec<usize> = out.logs.iter().map(|l| l.epoch).collect();
    assert_eq!(epochs, [1, 2], "{:?}", out.logs);
    assert!(out.stopped_early);
    assert_eq!(out.checkpoint.epoch, 1);
}

#[test]
fn checkpoint_reproduces_stored_validation_accuracy() {
    let m = corpus(10, 3);
    let out = train(&m, &ModelSpec::new(Arch::Resnet18), &quick(3)).unwrap();
    let ckpt = &out.checkpoint;
    assert_eq!(ckpt.manifest_fingerprint, m.fingerprint());
    let best = out.logs.iter().map(|l| l.val_accuracy).fold(0.0, f64::max);
    assert_eq!(ckpt.val_accuracy, best);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("best.ckpt");
    ckpt.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.to_bytes(), ckpt.to_bytes());

    let val = split_samples(&m, Split::Val);
    let eval = evaluate(&loaded.model().unwrap(), &val, 64).unwrap();
    assert!((eval.accuracy - ckpt.val_accuracy).abs() <= 1e-6);

    let frames: Vec<&GrayFrame> = val.iter().map(|s| &s.pixels).collect();
    let preds = predict(&loaded, &frames).unwrap();
    let correct = preds.iter().zip(&val).filter(|(p, s)| **p == s.label).count();
    assert!((correct as f64 / val.len() as f64 - ckpt.val_accuracy).abs() <= 1e-6);
    assert_eq!(predict(&loaded, &frames[..1]).unwrap().len(), 1);

    std::fs::write(&path, b"FERCKPT1garbage").unwrap();
    assert!(Checkpoint::load(&path).is_err());
}

#[test]
fn zeroed_head_predicts_first_label() {
    let mut model = ModelSpec::new(Arch::Resnet18).build(0).unwrap();
    let (w, b) = model.head();
    for id in [w, b] {
        model.params_mut().get_mut(id).data_mut().fill(0.0);
    }
    let frames: Vec<GrayFrame> = (0..5).map(|i| GrayFrame::filled(48, 48, i * 40)).collect();
    let refs: Vec<&GrayFrame> = frames.iter().collect();
    let preds = predict_model(&model, &refs, 2).unwrap();
    assert_eq!(preds, vec![EmotionLabel::Angry; 5]);
    let wrong = GrayFrame::filled(32, 32, 0);
    assert!(matches!(
        predict_model(&model, &[&wrong], 2),
        Err(TrainError::ImageShape { .. })
    ));
}

#[test]
fn untrained_loss_is_near_log_seven_for_every_backbone() {
    let m = synth_generate(74, 9);
    let samples: Vec<&ImageSample> = m.samples().iter().take(512).collect();
    for arch in Arch::ALL {
        let model = ModelSpec::new(arch).build(11).unwrap();
        let mut total = 0.0;
        for chunk in samples.chunks(64) {
            let frames: Vec<&GrayFrame> = chunk.iter().map(|s| &s.pixels).collect();
            let labels: Vec<usize> = chunk.iter().map(|s| s.label.index()).collect();
            let mut g = Graph::new(model.params(), Mode::Train);
            let x = g.input(images_to_tensor(&frames).unwrap());
            let logits = model.forward(&mut g, x);
            let loss = g.cross_entropy(logits, &labels);
            total += g.value(loss).data()[0] as f64 * chunk.len() as f64;
        }
        let ce = total / samples.len() as f64;
        assert!((ce - 7f64.ln()).abs() <= 0.15, "{arch}: {ce}");
    }
}

#[test]
fn sampler_epoch_draws_exactly_the_training_size() {
    let m = corpus(10, 4);
    let labels: Vec<EmotionLabel> = split_samples(&m, Split::Train).iter().map(|s| s.label).collect();
    let sampler = build_sampler(&labels, &class_weights_from_labels(&labels).unwrap(), 1).unwrap();
    let config = TrainConfig::default();
    for epoch in 0..3 {
        let order = epoch_order(labels.len(), &config, Some(&sampler), epoch);
        assert_eq!(order.len(), labels.len());
        assert!(order.iter().all(|&i| i < labels.len()));
    }
}

#[test]
fn flags_change_the_batches() {
    let m = corpus(10, 5);
    let spec = ModelSpec::new(Arch::Resnet18);
    let base = train(&m, &spec, &quick(1)).unwrap().logs[0].train_loss;
    let aug = train(&m, &spec, &TrainConfig { augment: true, ..quick(1) }).unwrap().logs[0].train_loss;
    let sampled = train(
        &m,
        &spec,
        &TrainConfig {
            weighted_sampler: true,
            ..quick(1)
        },
    )
    .unwrap()
    .logs[0]
        .train_loss;
    assert_ne!(base, aug);
    assert_ne!(base, sampled);
}

#[test]
fn rejects_unusable_inputs() {
    let spec = ModelSpec::new(Arch::Resnet18);
    let unsplit = synth_generate(2, 0);
    assert!(matches!(train(&unsplit, &spec, &quick(1)), Err(TrainError::EmptySplit("train"))));

    let no_sad = corpus(10, 6).filter(|s| s.label != EmotionLabel::Sad);
    let sampled = TrainConfig {
        weighted_sampler: true,
        ..quick(1)
    };
    assert!(matches!(train(&no_sad, &spec, &sampled), Err(TrainError::MissingClass(_))));

    let pretrained = ModelSpec {
        pretrained: true,
        ..spec
    };
    assert!(matches!(
        train(&corpus(2, 0), &pretrained, &quick(1)),
        Err(TrainError::PretrainedUnavailable(_))
    ));
    assert!(TrainConfig { epochs: 0, ..quick(1) }.validate().is_err());
    assert!(TrainConfig { patience: 0, ..quick(1) }.validate().is_err());
}
