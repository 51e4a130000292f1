mod common;

use gridcascade::neural::{
    parse_network, to_image, write_network, Activation, Head, LayerSpec, QNetwork, Shape,
    ACTION_COUNT,
};
use gridcascade::QNet;

use common::rl::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gradients_match_finite_differences_on_every_layer_kind() {
    for (i, mut net) in zoo().into_iter().enumerate() {
        for seed in 0..3 {
            let err = gradient_check(&mut net, 100 * i as u64 + seed);
            assert!(err < 1e-4, "net {i} seed {seed}: relative error {err:e}");
        }
    }
}

#[test]
fn text_format_round_trips_every_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for mut net in zoo() {
        net.init_uniform(&mut rng, 0.3);
        let text = write_network(&net);
        let back: QNet = parse_network(&text).unwrap();
        assert_eq!(back.layers(), net.layers());
        assert_eq!(back.params(), net.params());
        assert_eq!(write_network(&back), text);
    }
    assert!(write_network(&linear_net()).contains("\nlinear 7 4\n"));
}

#[test]
fn forward_and_backward_are_pure() {
    let mut net = conv_net(1);
    net.init_uniform(&mut ChaCha8Rng::seed_from_u64(4), 0.5);
    let x: Vec<f64> = (0..36).map(|i| (i as f64 * 0.37).sin()).collect();
    let (y1, c1) = net.forward(&x).unwrap();
    let (y2, c2) = net.forward(&x).unwrap();
    assert_eq!(y1, y2);
    let g = vec![1.0; ACTION_COUNT];
    assert_eq!(
        net.backward(&c1, &g).unwrap(),
        net.backward(&c2, &g).unwrap()
    );
}

#[test]
fn head_contract_is_enforced() {
    let wrong = QNetwork::<f64>::new(
        Shape::Vector { len: 3 },
        vec![LayerSpec::Dense {
            inputs: 3,
            outputs: 2,
        }],
        Head::Scalar,
    );
    assert!(wrong.is_err());
    let wrong = QNetwork::<f64>::new(
        Shape::Vector { len: 3 },
        vec![LayerSpec::Dense {
            inputs: 3,
            outputs: 1,
        }],
        Head::PerAction,
    );
    assert!(wrong.is_err());
    let shallow = QNet::shallow(9, 10).unwrap();
    assert_eq!(
        shallow.layers(),
        &[
            LayerSpec::Dense {
                inputs: 9,
                outputs: 10
            },
            LayerSpec::Activation {
                function: Activation::Tanh
            },
            LayerSpec::Dense {
                inputs: 10,
                outputs: 1
            },
        ]
    );
}

#[test]
fn image_padding_examples() {
    let img = to_image(&vec![0.5f64; 753]);
    assert_eq!((img.side, img.pixels.len()), (28, 784));
    assert!(img.pixels[753..].iter().all(|&p| p == 0.0));
    let img = to_image(&vec![0.5f64; 658]);
    assert_eq!((img.side, img.pixels.len()), (26, 676));
    assert_eq!(to_image(&[1.0f64; 4]).pixels.len(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_padding_is_neutral(
        n in 1usize..8,
        pad in 1usize..6,
        seed in any::<u64>(),
        deep in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = 5;
        let make = |len: usize| if deep { QNet::deep_dense(len, hidden) } else { QNet::shallow(len, hidden) };
        let mut small = make(n).unwrap();
        small.init_uniform(&mut rng, 0.5);
        let mut big = make(n + pad).unwrap();
        big.init_uniform(&mut rng, 0.5);
        // copy the small net's first-layer weights, zero the padded columns
        {
            let w = big.weights_mut(0);
            for o in 0..hidden {
                for i in 0..n + pad {
                    w[o * (n + pad) + i] = if i < n { small.weights(0)[o * n + i] } else { 0.0 };
                }
            }
        }
        big.biases_mut(0).copy_from_slice(small.biases(0));
        big.weights_mut(2).copy_from_slice(small.weights(2));
        big.biases_mut(2).copy_from_slice(small.biases(2));
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut padded = x.clone();
        padded.resize(n + pad, 0.0);
        prop_assert_eq!(small.predict(&x).unwrap(), big.predict(&padded).unwrap());
    }

    #[test]
    fn image_side_is_minimal(len in 0usize..2000) {
        let img = to_image(&vec![1.0f64; len]);
        prop_assert!(img.side * img.side >= len);
        prop_assert!(img.side == 0 || (img.side - 1) * (img.side - 1) < len);
        prop_assert!(img.pixels[len..].iter().all(|&p| p == 0.0));
    }
}
