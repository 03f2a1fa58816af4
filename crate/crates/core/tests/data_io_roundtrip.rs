use kmvnmf::data_io::{
    load_dataset, make_blobs, make_rings, minmax_scale, write_dataset, MultiViewDataset, View,
};
use ndarray::Array2;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
        Just(5e-324),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn csv_round_trip_is_bit_exact(
        a in prop::collection::vec(finite(), 12),
        b in prop::collection::vec(finite(), 8),
        labels in prop::collection::vec(0usize..2, 4),
    ) {
        let mut labels = labels;
        labels[0] = 0;
        labels[1] = 1;
        let ds = MultiViewDataset::new(
            vec![
                View::new("first", Array2::from_shape_vec((3, 4), a).unwrap()),
                View::new("second", Array2::from_shape_vec((2, 4), b).unwrap()),
            ],
            Some(labels),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(&paths, Some(&dir.path().join("labels.txt"))).unwrap();
        prop_assert_eq!(back.labels, ds.labels);
        for (x, y) in back.views.iter().zip(&ds.views) {
            prop_assert_eq!(&x.name, &y.name);
            prop_assert!(x.data.iter().zip(y.data.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn minmax_output_in_unit_interval(values in prop::collection::vec(-1e3..1e3f64, 15)) {
        let ds = MultiViewDataset::new(vec![View::new("v", Array2::from_shape_vec((3, 5), values).unwrap())], None).unwrap();
        let scaled = minmax_scale(&ds);
        prop_assert!(scaled.views[0].data.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn generators_are_pure(seed in any::<u64>()) {
        prop_assert_eq!(make_blobs(3, 12, &[2, 3], 0.2, seed).unwrap(), make_blobs(3, 12, &[2, 3], 0.2, seed).unwrap());
        prop_assert_eq!(make_rings(2, 10, 0.1, seed).unwrap(), make_rings(2, 10, 0.1, seed).unwrap());
    }
}

#[test]
fn header_row_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.csv");
    std::fs::write(&path, "s0,s1,s2\n1,2,3\n4,5,6\n").unwrap();
    let ds = load_dataset(&[path], None).unwrap();
    assert_eq!(ds.views[0].data, ndarray::array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
    assert_eq!(ds.views[0].name, "v");
}
