mod common;

use proptest::prelude::*;
use spectral_impute::gnn::{
    build_filter_sna, forward, perturb_basis, Architecture, GnnModel, Objective, PerturbationDelta,
};
use spectral_impute::tensor_io::{
    load_model_tensors, model_tensors, read_tensors, write_tensors, NamedTensor, TensorIoError,
};
use spectral_impute::DenseMatrix;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_finite_values_round_trip(
        rows in 1usize..5,
        cols in 1usize..5,
        raw in prop::collection::vec(any::<f64>(), 16),
    ) {
        let vals: Vec<f64> = raw.iter().cycle().take(rows * cols).map(|v| if v.is_finite() { *v } else { 0.0 }).collect();
        let m = DenseMatrix::from_vec(rows, cols, vals).unwrap();
        let t = vec![NamedTensor::matrix("m", &m)];
        let mut buf = Vec::new();
        write_tensors(&mut buf, &t).unwrap();
        let back = read_tensors(buf.as_slice()).unwrap();
        let got = back[0].to_matrix().unwrap();
        for (a, b) in got.as_slice().iter().zip(m.as_slice()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn checkpoint_restores_predictions() {
    let mut r = common::rng(1);
    let g = common::random_graph(&mut r, 10, 0.3);
    let filter = build_filter_sna(&g).unwrap();
    let x = common::random_dense(&mut r, 10, 3);
    for arch in [
        Architecture::Gcn,
        Architecture::ChebyNet { order: 2 },
        Architecture::Appnp { alpha: 0.1, steps: 10 },
    ] {
        let mut model = GnnModel::new(arch, 3, 4, 2, Objective::CrossEntropy, 7).unwrap();
        let mut delta = PerturbationDelta::zeros(perturb_basis(&filter, 3, None).unwrap());
        delta.deltas = vec![0.1, -0.2, 0.05];
        model.attach_delta(delta);

        let mut buf = Vec::new();
        write_tensors(&mut buf, &model_tensors(&model)).unwrap();
        let mut fresh = GnnModel::new(arch, 3, 4, 2, Objective::CrossEntropy, 99).unwrap();
        load_model_tensors(&mut fresh, &read_tensors(buf.as_slice()).unwrap()).unwrap();
        assert_eq!(forward(&fresh, &filter, &x).unwrap(), forward(&model, &filter, &x).unwrap());
    }
}

#[test]
fn mismatched_checkpoint_is_rejected() {
    let small = GnnModel::new(Architecture::Mlp, 3, 4, 2, Objective::Mse, 1).unwrap();
    let mut big = GnnModel::new(Architecture::Mlp, 3, 5, 2, Objective::Mse, 1).unwrap();
    match load_model_tensors(&mut big, &model_tensors(&small)) {
        Err(TensorIoError::Shape { name, .. }) => assert_eq!(name, "layer0.w0"),
        other => panic!("unexpected {other:?}"),
    }
}
