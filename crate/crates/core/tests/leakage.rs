use enhance::data::{generate_synthetic, kfold, select_features, Dataset, SyntheticRecipe};
use enhance::models::{fit, predict, ModelSpec};

fn data() -> Dataset {
    generate_synthetic(&SyntheticRecipe {
        n_per_class: vec![15, 15],
        n_features: 20,
        class_shift: 0.8,
        noise_sd: 1.0,
        seed: 4,
        block_offset: 0,
    })
    .unwrap()
}

/// Flips the labels of `rows`, keeping features and sample ids.
fn poison(ds: &Dataset, rows: &[usize]) -> Dataset {
    let mut labels = ds.labels().to_vec();
    for &i in rows {
        labels[i] = 1 - labels[i];
    }
    Dataset::new(
        ds.features().clone(),
        labels,
        ds.sample_ids().to_vec(),
        ds.feature_names().to_vec(),
        ds.class_names().to_vec(),
        "poisoned",
        ds.role,
    )
    .unwrap()
}

#[test]
fn training_artifacts_ignore_held_out_labels() {
    let ds = data();
    let plan = kfold(&ds, 5, true, 8).unwrap();
    let specs = [
        ModelSpec::linear_svm(1.0),
        ModelSpec::logistic(1.0),
        ModelSpec {
            layers: vec![0, 8, 0],
            epochs: 3,
            ..ModelSpec::feed_forward()
        },
    ];
    for fold in 0..5 {
        let test = plan.test_indices(fold);
        let bad = poison(&ds, &test);
        assert_eq!(kfold(&bad, 5, true, 8).unwrap().test_indices(fold).len(), test.len());
        let (train, held) = plan.split(&ds, fold).unwrap();
        let (train_bad, held_bad) = plan.split(&bad, fold).unwrap();
        assert_eq!(train.content_hash(), train_bad.content_hash());
        assert_eq!(select_features(&train, 0.2).unwrap(), select_features(&train_bad, 0.2).unwrap());
        for spec in &specs {
            let m = fit(spec, &train).unwrap();
            assert_eq!(m, fit(spec, &train_bad).unwrap());
            assert_eq!(
                predict(&m, held.features()).unwrap(),
                predict(&m, held_bad.features()).unwrap()
            );
        }
        assert!(!held.labels_read() && !held_bad.labels_read());
        // scoring is the only label access on the evaluation path
        let p = predict(&fit(&specs[0], &train).unwrap(), held.features()).unwrap();
        assert_eq!(held.correct(&p).unwrap() + held_bad.correct(&p).unwrap(), test.len());
        assert!(!held.labels_read());
    }
}
