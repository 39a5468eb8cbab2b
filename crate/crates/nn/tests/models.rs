use fer_nn::{softmax_rows, Adam, Arch, Graph, Mode, Model, Tensor};

fn batch(n: usize, f: impl Fn(usize, usize) -> f32) -> Tensor {
    let data = (0..n * 48 * 48).map(|i| f(i / (48 * 48), i % (48 * 48))).collect();
    Tensor::new(vec![n, 1, 48, 48], data).unwrap()
}

#[test]
fn every_arch_maps_gray_batch_to_finite_logits() {
    for arch in Arch::ALL {
        let m = Model::build(arch, 7, 0);
        let logits = m.logits(batch(4, |_, _| 0.0)).unwrap();
        assert_eq!(logits.shape(), [4, 7], "{arch}");
        assert!(logits.data().iter().all(|v| v.is_finite()), "{arch}");
        let varied = m.logits(batch(3, |n, i| ((i * (n + 1)) % 17) as f32 / 8.5 - 1.0)).unwrap();
        for row in softmax_rows(&varied) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6, "{arch}");
        }
    }
}

#[test]
fn trainable_parameter_counts_match_reference_backbones() {
    // reference totals with the 1000-way head replaced by a 7-way head
    let expected = [
        (Arch::Resnet18, 11_689_512 - 513_000 + 3_591),
        (Arch::Resnet34, 21_797_672 - 513_000 + 3_591),
        (Arch::Resnet50, 25_557_032 - 2_049_000 + 14_343),
        (Arch::Densenet121, 7_978_856 - 1_025_000 + 7_175),
        (Arch::EfficientnetB0, 5_288_548 - 1_281_000 + 8_967),
    ];
    for (arch, count) in expected {
        assert_eq!(Model::build(arch, 7, 0).params().num_weights(), count, "{arch}");
    }
}

#[test]
fn initialization_is_seeded() {
    let a = Model::build(Arch::Densenet121, 7, 5);
    let b = Model::build(Arch::Densenet121, 7, 5);
    let c = Model::build(Arch::Densenet121, 7, 6);
    let same = a.params().ids().all(|id| a.params().get(id) == b.params().get(id));
    assert!(same);
    let differs = a.params().ids().any(|id| a.params().get(id) != c.params().get(id));
    assert!(differs);
}

#[test]
fn arch_names_round_trip() {
    for arch in Arch::ALL {
        assert_eq!(arch.as_str().parse::<Arch>().unwrap(), arch);
    }
    assert!("vgg16".parse::<Arch>().is_err());
}

#[test]
fn rejects_multi_channel_input() {
    let m = Model::build(Arch::Resnet18, 7, 0);
    assert!(m.logits(Tensor::zeros(&[1, 3, 48, 48])).is_err());
}

#[test]
fn zero_learning_rate_leaves_weights_unchanged() {
    let mut m = Model::build(Arch::Resnet18, 7, 0);
    let before = m.params().clone();
    let x = batch(4, |n, i| ((i + n) % 5) as f32 / 5.0);
    let mut g = Graph::new(m.params(), Mode::Train);
    let v = g.input(x);
    let logits = m.forward(&mut g, v);
    let loss = g.cross_entropy(logits, &[0, 1, 2, 3]);
    let (grads, _) = g.backward(loss);
    assert!(grads.norm() > 0.0);
    Adam::new(0.0).step(m.params_mut(), &grads);
    assert!(m.params().ids().all(|id| m.params().get(id) == before.get(id)));
}

#[test]
fn few_steps_fit_a_fixed_batch() {
    let mut m = Model::build(Arch::Resnet18, 7, 1);
    let x = batch(14, |n, i| if (i / 48 + n * 7) % 14 < 7 { 1.0 } else { -1.0 } * (n % 7) as f32 / 7.0);
    let labels: Vec<usize> = (0..14).map(|n| n % 7).collect();
    let mut adam = Adam::new(1e-3);
    let mut losses = Vec::new();
    for _ in 0..15 {
        let mut g = Graph::new(m.params(), Mode::Train);
        let v = g.input(x.clone());
        let logits = m.forward(&mut g, v);
        let loss = g.cross_entropy(logits, &labels);
        losses.push(g.value(loss).data()[0]);
        let (grads, stats) = g.backward(loss);
        adam.step(m.params_mut(), &grads);
        m.params_mut().apply_stat_updates(&stats);
    }
    assert!(losses.last().unwrap() < &(losses[0] * 0.5), "{losses:?}");
}
