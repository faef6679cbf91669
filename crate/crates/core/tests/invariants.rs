use backprojection_core::activation::{ActivationKind, FEASIBILITY_MARGIN};
use backprojection_core::backprop::{backprop_gradients, finite_difference_network_gradient};
use backprojection_core::data::{encode_labels, generate_blobs, standardize};
use backprojection_core::gradient::{
    finite_difference_gradient, kronecker_layer_gradient, layer_gradient, relative_error, Batch,
};
use backprojection_core::kernel::{kernel_matrix, normalize_kernel, KernelKind};
use backprojection_core::loss::LossKind;
use backprojection_core::matrix::Matrix;
use backprojection_core::network::{LayerShape, Network};
use backprojection_core::trainer::{
    train_backprojection, update_layer_weights, Procedure, TrainConfig, TrainingSet, UpdateRecord,
};
use proptest::prelude::*;

fn activation() -> impl Strategy<Value = ActivationKind> {
    prop::sample::select(ActivationKind::ALL.to_vec())
}

fn loss_for(act: ActivationKind) -> BoxedStrategy<LossKind> {
    if act == ActivationKind::Sigmoid {
        prop::sample::select(LossKind::ALL.to_vec()).boxed()
    } else {
        Just(LossKind::Mse).boxed()
    }
}

fn layer_shape() -> impl Strategy<Value = LayerShape> {
    (1usize..=5, activation())
        .prop_flat_map(|(units, act)| (Just(units), Just(act), loss_for(act)))
        .prop_map(|(units, act, loss)| LayerShape::new(units, act, loss))
}

/// A random network plus a batch whose targets lie inside the output activation's range.
fn instance() -> impl Strategy<Value = (Network, Batch)> {
    (
        1usize..=5,
        prop::collection::vec(layer_shape(), 1..=3),
        1usize..=8,
        any::<u64>(),
    )
        .prop_flat_map(|(d, shapes, b, seed)| {
            let p = shapes.last().unwrap().units;
            let last = shapes.last().unwrap().activation;
            (
                Just(d),
                Just(shapes),
                Just(seed),
                prop::collection::vec(-2.0f64..2.0, d * b),
                prop::collection::vec(target_value(last), p * b),
                Just(b),
            )
        })
        .prop_map(|(d, shapes, seed, xs, ys, b)| {
            let net = Network::random(d, &shapes, seed).unwrap();
            let p = shapes.last().unwrap().units;
            let x = Matrix::from_row_major(d, b, xs).unwrap();
            let y = Matrix::from_row_major(p, b, ys).unwrap();
            (net, Batch::new(x, y).unwrap())
        })
}

fn target_value(act: ActivationKind) -> BoxedStrategy<f64> {
    match act {
        ActivationKind::Sigmoid => (0.05f64..0.95).boxed(),
        ActivationKind::Tanh => (-0.95f64..0.95).boxed(),
        ActivationKind::Elu => (-0.9f64..2.0).boxed(),
        ActivationKind::Linear => (-2.0f64..2.0).boxed(),
    }
}

proptest! {
    #[test]
    fn round_trip_on_bounded_inputs(kind in activation(), z in -5.0f64..=5.0) {
        let back = kind.inverse(kind.apply(z)).unwrap();
        prop_assert!((back - z).abs() < 1e-9, "{kind}: {z} -> {back}");
    }

    #[test]
    fn derivative_matches_central_difference(kind in activation(), z in -3.0f64..=3.0) {
        prop_assume!(kind != ActivationKind::Elu || z.abs() > 1e-5);
        let h = 1e-6;
        let fd = (kind.apply(z + h) - kind.apply(z - h)) / (2.0 * h);
        prop_assert!((kind.derivative(z) - fd).abs() < 1e-6);
        prop_assert!((kind.derivative_given(z, kind.apply(z)) - kind.derivative(z)).abs() < 1e-15);
    }

    #[test]
    fn projection_is_idempotent_and_feasible(kind in activation(), y in -1e6f64..1e6) {
        let p = kind.project(y);
        prop_assert_eq!(kind.project(p), p);
        prop_assert!(kind.inverse(p).is_ok());
    }

    #[test]
    fn forward_lands_in_feasible_closure(kind in activation(), z in -1e3f64..1e3) {
        let (lo, hi) = kind.feasible_interval();
        let f = kind.apply(z);
        prop_assert!(f.is_finite() && f >= lo && f <= hi);
    }

    #[test]
    fn loss_gradient_matches_central_difference(
        f in prop::collection::vec(0.05f64..0.95, 1..6),
        seed in any::<u64>(),
        kind in prop::sample::select(LossKind::ALL.to_vec()),
    ) {
        let y: Vec<f64> = f.iter().enumerate().map(|(i, _)| ((seed >> i) & 1) as f64).collect();
        let g = kind.grad(&f, &y).unwrap();
        let h = 1e-6;
        for i in 0..f.len() {
            let (mut a, mut b) = (f.clone(), f.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (kind.value(&a, &y).unwrap() - kind.value(&b, &y).unwrap()) / (2.0 * h);
            prop_assert!((g[i] - fd).abs() < 1e-6 * (1.0 + g[i].abs()));
        }
    }

    #[test]
    fn mse_is_non_negative(f in prop::collection::vec(-1e3f64..1e3, 4), y in prop::collection::vec(-1e3f64..1e3, 4)) {
        prop_assert!(LossKind::Mse.value(&f, &y).unwrap() >= 0.0);
    }

    #[test]
    fn normalized_kernel_has_unit_diagonal(
        xs in prop::collection::vec(-3.0f64..3.0, 2 * 6),
        gamma in 0.01f64..5.0,
    ) {
        let a = Matrix::from_row_major(2, 6, xs).unwrap();
        for kind in [KernelKind::Linear, KernelKind::Rbf { gamma }] {
            let Ok(k) = normalize_kernel(&kernel_matrix(&kind, &a, &a).unwrap()) else {
                continue;
            };
            for i in 0..6 {
                prop_assert!((k[(i, i)] - 1.0).abs() <= 1e-12);
                for j in 0..6 {
                    prop_assert_eq!(k[(i, j)], k[(j, i)]);
                }
            }
        }
        let raw = kernel_matrix(&KernelKind::Rbf { gamma }, &a, &a).unwrap();
        prop_assert!(normalize_kernel(&raw).unwrap().max_abs_diff(&raw) <= 1e-12);
    }

    #[test]
    fn standardize_is_idempotent(xs in prop::collection::vec(-50.0f64..50.0, 3 * 10)) {
        let x = Matrix::from_row_major(3, 10, xs).unwrap();
        prop_assume!((0..3).all(|r| {
            let row = x.row(r);
            row.iter().any(|v| (v - row[0]).abs() > 1e-3)
        }));
        let (once, _) = standardize(&x).unwrap();
        let (twice, _) = standardize(&once).unwrap();
        prop_assert!(once.max_abs_diff(&twice) < 1e-12);
    }

    #[test]
    fn one_hot_columns_sum_to_one(labels in prop::collection::vec(0usize..5, 1..40)) {
        let y = encode_labels(&labels, 5, ActivationKind::Sigmoid).unwrap();
        for (j, &l) in labels.iter().enumerate() {
            let col = y.column(j);
            prop_assert_eq!(col.iter().sum::<f64>(), 1.0);
            prop_assert_eq!(col[l], 1.0);
        }
    }

    #[test]
    fn blob_counts_match_request(a in 1usize..30, b in 1usize..30, seed in any::<u64>()) {
        let data = generate_blobs(&[a, b], &[vec![0.0, 0.0], vec![1.0, 1.0]], &[1.0, 0.5], seed).unwrap();
        prop_assert_eq!(data.class_counts(), vec![a, b]);
    }

    #[test]
    fn layer_gradient_matches_oracles((net, batch) in instance()) {
        for m in 1..=net.n_layers() {
            let g = layer_gradient(&net, &batch, m).unwrap();
            let fd = finite_difference_gradient(&net, &batch, m, 1e-5).unwrap();
            prop_assert!(relative_error(&g, &fd) < 1e-4, "layer {m}: {}", relative_error(&g, &fd));
            let kron = kronecker_layer_gradient(&net, &batch, m).unwrap();
            prop_assert!(g.max_abs_diff(&kron) <= 1e-12 * (1.0 + g.frobenius_norm()));
        }
    }

    #[test]
    fn backprop_gradient_matches_stencil((net, batch) in instance()) {
        let (grads, _) = backprop_gradients(&net, &batch).unwrap();
        let fd = finite_difference_network_gradient(&net, &batch, 1e-5).unwrap();
        for (g, f) in grads.iter().zip(&fd) {
            prop_assert!(relative_error(g, f) < 1e-4);
        }
    }

    #[test]
    fn update_touches_only_its_layer((net, batch) in instance(), pick in any::<prop::sample::Index>()) {
        let m = pick.index(net.n_layers()) + 1;
        let mut updated = net.clone();
        update_layer_weights(&mut updated, &batch.inputs, &batch.targets, m, 1e-2).unwrap();
        for r in 1..=net.n_layers() {
            if r != m {
                prop_assert_eq!(updated.weights(r).unwrap(), net.weights(r).unwrap());
            }
        }
    }
}

#[test]
fn projection_margin_is_respected() {
    assert_eq!(ActivationKind::Sigmoid.project(-1.0), FEASIBILITY_MARGIN);
}

#[test]
fn every_procedure_updates_each_layer_once_per_batch() {
    let data = generate_blobs(&[12, 11], &[vec![-1.0, 0.0], vec![1.0, 0.0]], &[0.5, 0.5], 3).unwrap();
    let targets = encode_labels(&data.labels, 2, ActivationKind::Sigmoid).unwrap();
    let set = TrainingSet::new(data.x.clone(), targets, data.labels.clone()).unwrap();
    let shapes = [
        LayerShape::new(4, ActivationKind::Elu, LossKind::Mse),
        LayerShape::new(3, ActivationKind::Tanh, LossKind::Mse),
        LayerShape::new(1, ActivationKind::Sigmoid, LossKind::Mse),
    ];
    for procedure in Procedure::ALL {
        let mut net = Network::random(2, &shapes, 1).unwrap();
        let config = TrainConfig {
            procedure,
            batch_size: 5,
            epochs: 3,
            ..TrainConfig::default()
        };
        let mut log: Vec<UpdateRecord> = Vec::new();
        let report = train_backprojection(&mut net, &set, &config, &mut log).unwrap();
        assert_eq!(report.epoch_loss.len(), 3);
        // 23 samples in batches of 5 -> 5 batches per epoch
        assert_eq!(log.len(), 3 * 5 * 3);
        for chunk in log.chunks(3) {
            let mut layers: Vec<usize> = chunk.iter().map(|r| r.layer).collect();
            assert!(chunk.iter().all(|r| (r.epoch, r.batch) == (chunk[0].epoch, chunk[0].batch)));
            layers.sort_unstable();
            assert_eq!(layers, vec![1, 2, 3]);
        }

        let mut again = Network::random(2, &shapes, 1).unwrap();
        let rerun = train_backprojection(&mut again, &set, &config, &mut ()).unwrap();
        assert_eq!(rerun.epoch_loss, report.epoch_loss);
        assert_eq!(again, net);
    }
}
