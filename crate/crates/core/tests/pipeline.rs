use mlspi::dataset::{self, Dataset, Image, LabeledSample};
use mlspi::evaluation::{self, ConfusionMatrix, Model};
use mlspi::optics::{self, NoiseModel};
use mlspi::perceptron::{self, ClassifierEnsemble, Target, TrainConfig, WeightVector};
use mlspi::rng::rng_from_seed;
use rand::Rng;

fn random_image(rng: &mut impl Rng, h: usize, w: usize) -> Image {
    Image::new(h, w, (0..h * w).map(|_| rng.random::<f32>()).collect()).unwrap()
}

fn random_ensemble(seed: u64, classes: usize, h: usize, w: usize) -> ClassifierEnsemble {
    let mut rng = rng_from_seed(seed);
    let classifiers = (0..classes)
        .map(|_| WeightVector::new((0..h * w).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
        .collect();
    let names = (0..classes).map(|k| k.to_string()).collect();
    ClassifierEnsemble::new(classifiers, names, h, w, TrainConfig::default()).unwrap()
}

/// Ten blurry class prototypes plus noise; linearly separable enough to train on.
fn prototype_dataset(seed: u64, per_class: usize) -> Dataset {
    let (h, w) = (8, 8);
    let mut rng = rng_from_seed(seed);
    let protos: Vec<Vec<f32>> = (0..10)
        .map(|_| (0..h * w).map(|_| if rng.random_bool(0.3) { 0.9 } else { 0.05 }).collect())
        .collect();
    let mut samples = Vec::new();
    for i in 0..per_class * 10 {
        let label = i % 10;
        let px = protos[label]
            .iter()
            .map(|&p| (p + rng.random_range(-0.05f32..0.05)).clamp(0.0, 1.0))
            .collect();
        samples.push(LabeledSample {
            image: Image::new(h, w, px).unwrap(),
            label,
        });
    }
    Dataset::with_numbered_classes("prototypes", 10, samples).unwrap()
}

#[test]
fn exact_step_hits_target() {
    let mut rng = rng_from_seed(11);
    for _ in 0..200 {
        let n = rng.random_range(1..=64);
        let w = WeightVector::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let x = random_image(&mut rng, 1, n);
        if x.pixels().iter().all(|&p| p == 0.0) {
            continue;
        }
        let norm2: f64 = x.pixels().iter().map(|&p| f64::from(p).powi(2)).sum();
        let target = if rng.random_bool(0.5) { Target::Positive } else { Target::Negative };
        let w2 = perceptron::delta_update(&w, &x, target, 1.0 / norm2).unwrap();
        let y = perceptron::measure(&w2, &x).unwrap();
        assert!((y - target.value()).abs() < 1e-9, "y={y}");
    }
}

#[test]
fn residual_contracts_by_known_factor() {
    let mut rng = rng_from_seed(12);
    for _ in 0..1000 {
        let n = rng.random_range(1..=64);
        let w = WeightVector::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let x = random_image(&mut rng, 1, n);
        let norm2: f64 = x.pixels().iter().map(|&p| f64::from(p).powi(2)).sum();
        let r = rng.random_range(1e-3..2.0) / norm2.max(1e-3);
        let t = Target::Negative.value();
        let before = t - perceptron::measure(&w, &x).unwrap();
        let w2 = perceptron::delta_update(&w, &x, Target::Negative, r).unwrap();
        let after = t - perceptron::measure(&w2, &x).unwrap();
        let expected = (1.0 - r * norm2) * before;
        assert!((after - expected).abs() < 1e-9, "{after} vs {expected}");
    }
}

#[test]
fn measure_matches_naive_sum() {
    let mut rng = rng_from_seed(13);
    for _ in 0..2000 {
        let n = rng.random_range(1..=64);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = random_image(&mut rng, 1, n);
        let mut naive = 0.0;
        for i in 0..n {
            naive += w[i] * f64::from(x.pixels()[i]);
        }
        let y = perceptron::measure(&WeightVector::new(w).unwrap(), &x).unwrap();
        assert!((y - naive).abs() < 1e-12);
    }
}

#[test]
fn realized_argmax_matches_raw_on_random_images() {
    let ensemble = random_ensemble(21, 10, 12, 12);
    let patterns = optics::realize(&ensemble, None, None).unwrap();
    let mut rng = rng_from_seed(22);
    for _ in 0..1000 {
        let x = random_image(&mut rng, 12, 12);
        let (raw, _) = perceptron::classify_raw(&ensemble, &x).unwrap();
        let (opt, _) = optics::classify_optical(&patterns, &x, &NoiseModel::NONE).unwrap();
        assert_eq!(raw, opt);
    }
}

#[test]
fn realized_readings_are_shared_affine_of_raw() {
    let ensemble = random_ensemble(23, 5, 6, 6);
    let patterns = optics::realize(&ensemble, None, None).unwrap();
    let mut rng = rng_from_seed(24);
    let x = random_image(&mut rng, 6, 6);
    let s = x.total_intensity();
    let (_, raw) = perceptron::classify_raw(&ensemble, &x).unwrap();
    let (_, opt) = optics::classify_optical(&patterns, &x, &NoiseModel::NONE).unwrap();
    for (y, v) in raw.values.iter().zip(&opt.values) {
        let expected = (y + patterns.offset() * s) / patterns.scale();
        assert!((v - expected).abs() < 1e-9);
    }
}

#[test]
fn trained_pipeline_end_to_end() {
    let train = prototype_dataset(31, 40);
    let test = prototype_dataset(31, 10);
    let config = TrainConfig {
        learning_rate: 1e-3,
        epochs: 20,
        ..TrainConfig::default()
    };
    let ensemble = perceptron::train_ensemble(&train, &config).unwrap();
    let raw = evaluation::evaluate(&Model::Raw(&ensemble), &test).unwrap();
    assert!(raw.accuracy > 0.9, "raw accuracy {}", raw.accuracy);

    let patterns = optics::realize(&ensemble, None, None).unwrap();
    let optical = evaluation::evaluate(
        &Model::Optical {
            patterns: &patterns,
            noise: NoiseModel::NONE,
        },
        &test,
    )
    .unwrap();
    assert_eq!(raw.confusion, optical.confusion);

    // truncated and quantized patterns: agreement is measured, not assumed
    let rough = optics::realize(&ensemble, Some((1.0, 99.0)), Some(16)).unwrap();
    let mut agree = 0;
    for s in test.samples() {
        let (a, _) = perceptron::classify_raw(&ensemble, &s.image).unwrap();
        let (b, _) = optics::classify_optical(&rough, &s.image, &NoiseModel::NONE).unwrap();
        agree += usize::from(a == b);
    }
    assert!(agree as f64 / test.len() as f64 > 0.8);

    for k in 0..10 {
        assert_eq!(raw.confusion.row_sum(k), 10);
    }
}

#[test]
fn training_depends_only_on_training_data() {
    let train = prototype_dataset(41, 10);
    let config = TrainConfig {
        learning_rate: 1e-3,
        epochs: 3,
        ..TrainConfig::default()
    };
    let a = perceptron::train_ensemble(&train, &config).unwrap();
    // evaluating on unrelated data in between must not perturb a retrain
    let other = prototype_dataset(99, 5);
    evaluation::evaluate(&Model::Raw(&a), &other).unwrap();
    let b = perceptron::train_ensemble(&train, &config).unwrap();
    assert_eq!(a.classifiers(), b.classifiers());
}

#[test]
fn idx_files_round_trip_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng_from_seed(51);
    let images: Vec<Vec<u8>> = (0..7).map(|_| (0..20).map(|_| rng.random()).collect()).collect();
    let labels: Vec<u8> = (0..7).map(|i| (i % 3) as u8).collect();
    let ip = dir.path().join("img");
    let lp = dir.path().join("lbl");
    dataset::write_idx_images(&ip, 4, 5, &images).unwrap();
    dataset::write_idx_labels(&lp, &labels).unwrap();
    let ds = dataset::load_idx(&ip, &lp).unwrap();
    assert_eq!(ds.shape(), Some((4, 5)));
    for (s, (img, &l)) in ds.samples().iter().zip(images.iter().zip(&labels)) {
        assert_eq!(&s.image.to_bytes(), img);
        assert_eq!(s.label, usize::from(l));
    }
    let ip2 = dir.path().join("img2");
    let bytes: Vec<Vec<u8>> = ds.samples().iter().map(|s| s.image.to_bytes()).collect();
    dataset::write_idx_images(&ip2, 4, 5, &bytes).unwrap();
    assert_eq!(std::fs::read(&ip).unwrap(), std::fs::read(&ip2).unwrap());
}

#[test]
fn report_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = ConfusionMatrix::from_rows(vec![vec![5, 1, 0], vec![0, 4, 2], vec![1, 0, 7]]).unwrap();
    let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let csv = evaluation::confusion_to_csv(&m, &names).unwrap();
    let (names2, m2) = evaluation::confusion_from_csv(&csv).unwrap();
    assert_eq!(names, names2);
    assert_eq!(m, m2);

    let ensemble = random_ensemble(61, 3, 5, 4);
    let patterns = optics::realize(&ensemble, None, Some(256)).unwrap();
    optics::export_patterns(&patterns, dir.path()).unwrap();
    let back = optics::import_patterns(dir.path()).unwrap();
    assert_eq!(patterns.patterns(), back.patterns());
}
