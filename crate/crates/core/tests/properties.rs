//! Randomized invariants of the numerical building blocks.

mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use shiftreg::autodiff::Tape;
use shiftreg::dataset::{
    decode_graph, encode_graph, generate_sbm, make_uniform_splits, select_uniform_train,
};
use shiftreg::discrepancy::{cmd, median_bandwidth, mmd, Bandwidth, CmdConfig, Kernel, MmdConfig};
use shiftreg::models::{propagation_trajectory, Model, ModelInputs, ModelKind};
use shiftreg::ppr::{biased_train_select, ppr_exact, ppr_power, BiasConfig, PprConfig};
use shiftreg::sparse::{build_csr, normalize_adjacency};
use shiftreg::{Graph, Matrix};

fn random_graph(seed: u64, n: usize, p: f64, d: usize, classes: usize) -> Graph {
    let mut r = common::rng(seed);
    let adj = build_csr(&common::random_edges(&mut r, n, p), n).unwrap();
    let features = common::uniform(&mut r, n, d, -1.0, 1.0);
    let labels = (0..n).map(|i| i % classes).collect();
    Graph::new("random", adj, features, labels, classes, vec![]).unwrap()
}

fn dense_product(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

fn value(f: impl FnOnce(&mut Tape) -> shiftreg::Result<shiftreg::autodiff::Var>) -> f64 {
    common::scalar_of(f)
}

fn cmd_value(p: &Matrix, q: &Matrix, cfg: &CmdConfig) -> f64 {
    value(|t| {
        let (a, b) = (t.constant(p.clone()), t.constant(q.clone()));
        cmd(t, a, b, cfg)
    })
}

fn mmd_value(p: &Matrix, q: &Matrix, cfg: &MmdConfig) -> f64 {
    value(|t| {
        let (a, b) = (t.constant(p.clone()), t.constant(q.clone()));
        mmd(t, a, b, cfg)
    })
}

fn shuffled_rows(m: &Matrix, seed: u64) -> Matrix {
    let mut order: Vec<usize> = (0..m.rows()).collect();
    order.shuffle(&mut common::rng(seed));
    m.select_rows(&order)
}

const MMD_CONFIGS: [MmdConfig; 3] = [
    MmdConfig {
        kernel: Kernel::Rbf,
        bandwidth: Bandwidth::Median,
    },
    MmdConfig {
        kernel: Kernel::Rbf,
        bandwidth: Bandwidth::Fixed(0.7),
    },
    MmdConfig {
        kernel: Kernel::Linear,
        bandwidth: Bandwidth::Median,
    },
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn spmm_matches_dense_multiply(seed in any::<u64>(), n in 1usize..=50, p in 0.0f64..0.5, k in 1usize..6) {
        let mut r = common::rng(seed);
        let m = common::random_norm_adjacency(&mut r, n, p);
        let h = common::uniform(&mut r, n, k, -2.0, 2.0);
        let sparse = m.spmm(&h).unwrap();
        prop_assert!(sparse.max_abs_diff(&dense_product(&m.to_dense(), &h)) <= 1e-12);
    }

    #[test]
    fn normalized_adjacency_is_symmetric_and_bounded(seed in any::<u64>(), n in 1usize..=60, p in 0.0f64..0.6) {
        let mut r = common::rng(seed);
        let a = common::random_norm_adjacency(&mut r, n, p);
        for i in 0..n {
            for (j, v) in a.row(i) {
                prop_assert_eq!(v.to_bits(), a.get(j, i).to_bits());
                prop_assert!(v > 0.0 && v <= 1.0);
            }
            prop_assert!(a.get(i, i) > 0.0);
        }
    }

    #[test]
    fn normalized_adjacency_has_spectral_radius_one(seed in any::<u64>(), n in 2usize..=100, p in 0.01f64..0.4) {
        let mut r = common::rng(seed);
        let a = common::random_norm_adjacency(&mut r, n, p);
        // Ã is symmetric, so every ‖Ãv‖/‖v‖ bounds its largest |eigenvalue|
        // from below, and power iteration drives the ratio up to it.
        let mut v = common::uniform(&mut r, n, 1, -1.0, 1.0);
        let norm = |m: &Matrix| m.data().iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut ratio = 0.0;
        for _ in 0..300 {
            let nv = norm(&v);
            let next = a.spmm(&v.map(|x| x / nv)).unwrap();
            ratio = norm(&next);
            prop_assert!(ratio <= 1.0 + 1e-9, "ratio {}", ratio);
            v = next;
        }
        prop_assert!(ratio > 0.5);
    }

    #[test]
    fn splits_satisfy_their_invariants(
        seed in any::<u64>(),
        blocks in 2usize..5,
        per_block in 15usize..40,
        per_class in 1usize..4,
    ) {
        let g = generate_sbm(blocks, per_block, 0.3, 0.02, 4, seed).unwrap();
        let n = g.num_nodes();
        let (val, test) = (n / 5, n / 4);
        let masks = make_uniform_splits(&g, per_class, val, test, seed).unwrap();
        masks.validate(&g, val, test).unwrap();
        prop_assert_eq!(masks.val_indices().len(), val);
        prop_assert_eq!(masks.test_indices().len(), test);
        let train = masks.train_indices();
        prop_assert_eq!(train.len(), per_class * blocks);
        for c in 0..blocks {
            prop_assert_eq!(train.iter().filter(|&&i| g.labels()[i] == c).count(), per_class);
        }
        for i in 0..n {
            let flags = [masks.train_indices().contains(&i), masks.val_indices().contains(&i), masks.test_indices().contains(&i)];
            prop_assert!(flags.iter().filter(|&&f| f).count() <= 1);
        }
        prop_assert_eq!(make_uniform_splits(&g, per_class, val, test, seed).unwrap(), masks);
    }

    #[test]
    fn cache_round_trip_is_exact(seed in any::<u64>(), n in 1usize..40, d in 1usize..6) {
        let g = random_graph(seed, n, 0.2, d, 3.min(n));
        let back = decode_graph(&encode_graph(&g), g.name(), g.label_names().to_vec()).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn softmax_rows_sum_to_one(seed in any::<u64>(), rows in 1usize..10, cols in 1usize..8, scale in 0.1f64..50.0) {
        let mut r = common::rng(seed);
        let x = common::uniform(&mut r, rows, cols, -scale, scale);
        let mut t = Tape::new();
        let v = t.constant(x);
        let s = t.row_softmax(v);
        for i in 0..rows {
            let total: f64 = t.value(s).row(i).iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn power_iteration_matches_exact_solve(seed in any::<u64>(), n in 1usize..=50, p in 0.0f64..0.4, alpha in 0.05f64..=1.0) {
        let mut r = common::rng(seed);
        let a = common::random_norm_adjacency(&mut r, n, p);
        let exact = ppr_exact(&a, alpha, 5000).unwrap();
        prop_assert!(exact.data().iter().all(|&v| v >= -1e-12));
        let cfg = PprConfig { alpha, ..PprConfig::default() };
        for s in 0..n {
            let col = ppr_power(&a, alpha, s, &cfg).unwrap();
            for i in 0..n {
                prop_assert!((col[i] - exact[(i, s)]).abs() <= 1e-8, "entry ({}, {})", i, s);
                prop_assert!(col[i] >= -1e-12);
            }
        }
    }

    #[test]
    fn full_teleport_gives_the_identity(seed in any::<u64>(), n in 1usize..=50, p in 0.0f64..0.4) {
        let mut r = common::rng(seed);
        let a = common::random_norm_adjacency(&mut r, n, p);
        prop_assert_eq!(ppr_exact(&a, 1.0, 5000).unwrap(), Matrix::identity(n));
        let cfg = PprConfig { alpha: 1.0, ..PprConfig::default() };
        for s in 0..n {
            let col = ppr_power(&a, 1.0, s, &cfg).unwrap();
            let unit: Vec<f64> = (0..n).map(|i| if i == s { 1.0 } else { 0.0 }).collect();
            prop_assert_eq!(col, unit);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn ppr_mass_stays_in_the_seed_block(seed in any::<u64>()) {
        let g = generate_sbm(2, 40, 0.3, 0.01, 2, seed).unwrap();
        let s = (seed % 80) as usize;
        let scores = ppr_power(g.norm_adjacency(), 0.1, s, &PprConfig::default()).unwrap();
        let block_mean = |b: usize| {
            let members: Vec<f64> = (0..80).filter(|&i| g.labels()[i] == b).map(|i| scores[i]).collect();
            members.iter().sum::<f64>() / members.len() as f64
        };
        let own = g.labels()[s];
        prop_assert!(block_mean(own) > block_mean(1 - own));
    }

    #[test]
    fn full_bias_takes_the_top_ranked_candidates(seed in any::<u64>(), per_class in 1usize..4) {
        let g = generate_sbm(2, 10, 0.5, 0.1, 2, seed).unwrap();
        let pi = ppr_exact(g.norm_adjacency(), 0.1, 5000).unwrap();
        let candidates: Vec<bool> = (0..20).map(|i| i % 7 != 3).collect();
        let cfg = BiasConfig { epsilon: 1.0, per_class_train: per_class, seed };
        let sel = biased_train_select(&g, &pi, &candidates, &cfg).unwrap();
        prop_assert!(candidates[sel.seed_node]);
        for c in 0..2 {
            let mut ranked: Vec<usize> = (0..20).filter(|&i| candidates[i] && g.labels()[i] == c).collect();
            ranked.sort_by(|&a, &b| pi[(sel.seed_node, b)].total_cmp(&pi[(sel.seed_node, a)]).then(a.cmp(&b)));
            let mut expected = ranked[..per_class].to_vec();
            expected.sort_unstable();
            let got: Vec<usize> = sel.indices.iter().copied().filter(|&i| g.labels()[i] == c).collect();
            prop_assert_eq!(got, expected);
        }
        prop_assert_eq!(biased_train_select(&g, &pi, &candidates, &cfg).unwrap(), sel);
    }

    #[test]
    fn zero_bias_is_uniform_selection(seed in any::<u64>(), per_class in 1usize..4) {
        let g = generate_sbm(3, 12, 0.5, 0.05, 3, seed).unwrap();
        let pi = ppr_exact(g.norm_adjacency(), 0.1, 5000).unwrap();
        let candidates = vec![true; g.num_nodes()];
        let cfg = BiasConfig { epsilon: 0.0, per_class_train: per_class, seed };
        let sel = biased_train_select(&g, &pi, &candidates, &cfg).unwrap();
        prop_assert_eq!(sel.indices, select_uniform_train(&g, &candidates, per_class, seed).unwrap());
    }

    #[test]
    fn models_are_permutation_equivariant(seed in any::<u64>(), n in 2usize..30, gcn in any::<bool>()) {
        let g = random_graph(seed, n, 0.2, 5, 2);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut common::rng(seed ^ 1));
        let h = g.permute(&perm).unwrap();
        let kind = if gcn { ModelKind::Gcn } else { ModelKind::Appnp };
        let model = Model::init(kind, 5, 8, 2, 10, 0.1, 0.5, seed).unwrap();
        let before = model.predict(&ModelInputs::new(&g)).unwrap();
        let after = model.predict(&ModelInputs::new(&h)).unwrap();
        for i in 0..n {
            for c in 0..2 {
                prop_assert!((after[(perm[i], c)] - before[(i, c)]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn propagation_steps_shrink(seed in any::<u64>(), n in 1usize..50, p in 0.0f64..0.4, alpha in 0.05f64..=1.0) {
        let mut r = common::rng(seed);
        let a = common::random_norm_adjacency(&mut r, n, p);
        let h = common::uniform(&mut r, n, 3, -1.0, 1.0);
        let z = propagation_trajectory(&a, &h, alpha, 30).unwrap();
        // Measured in the Frobenius norm, where ‖Ã‖₂ ≤ 1 makes each step a
        // contraction by 1 − α.
        let step = |k: usize| z[k + 1].zip_map(&z[k], |x, y| x - y).data().iter().map(|v| v * v).sum::<f64>().sqrt();
        for k in 0..29 {
            prop_assert!(step(k + 1) <= step(k) * (1.0 - alpha) * (1.0 + 1e-9) + 1e-15);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn discrepancies_are_nonnegative_symmetric_and_match_oracles(
        seed in any::<u64>(),
        n1 in 2usize..12,
        n2 in 2usize..12,
        c in 1usize..5,
        k in 1usize..7,
    ) {
        let mut r = common::rng(seed);
        let p = common::uniform(&mut r, n1, c, 0.0, 1.0);
        let q = common::uniform(&mut r, n2, c, 0.0, 1.0);
        let cmd_cfg = CmdConfig { num_moments: k, ..CmdConfig::default() };

        let d = cmd_value(&p, &q, &cmd_cfg);
        prop_assert!(d >= 0.0);
        prop_assert!((d - cmd_value(&q, &p, &cmd_cfg)).abs() <= 1e-12);
        prop_assert!((d - common::cmd_oracle(&p, &q, &cmd_cfg)).abs() <= 1e-12);
        let longer = CmdConfig { num_moments: k + 1, ..cmd_cfg };
        prop_assert!(cmd_value(&p, &q, &longer) >= d);

        for cfg in &MMD_CONFIGS {
            let m = mmd_value(&p, &q, cfg);
            prop_assert!(m >= 0.0);
            prop_assert!((m - mmd_value(&q, &p, cfg)).abs() <= 1e-12);
        }
        let sigma = median_bandwidth(&p, &q).unwrap();
        prop_assert!((sigma - common::median_distance_oracle(&p, &q)).abs() <= 1e-12);
        let rbf = mmd_value(&p, &q, &MMD_CONFIGS[0]);
        prop_assert!((rbf - common::mmd_rbf_oracle(&p, &q, sigma)).abs() <= 1e-12);
        let fixed = mmd_value(&p, &q, &MMD_CONFIGS[1]);
        prop_assert!((fixed - common::mmd_rbf_oracle(&p, &q, 0.7)).abs() <= 1e-12);
    }

    #[test]
    fn discrepancies_vanish_on_the_same_multiset(seed in any::<u64>(), n in 1usize..12, c in 1usize..5) {
        let mut r = common::rng(seed);
        let p = common::uniform(&mut r, n, c, 0.0, 1.0);
        let q = shuffled_rows(&p, seed);
        prop_assert!(cmd_value(&p, &q, &CmdConfig::default()) <= 1e-12);
        for cfg in &MMD_CONFIGS {
            prop_assert!(mmd_value(&p, &q, cfg) <= 1e-12);
        }
    }
}

#[test]
fn every_parameter_receives_a_gradient() {
    for kind in [ModelKind::Appnp, ModelKind::Gcn] {
        for seed in 0..20 {
            let g = random_graph(seed, 25, 0.15, 6, 3);
            let inputs = ModelInputs::new(&g);
            let model = Model::init(kind, 6, 8, 3, 5, 0.1, 0.5, seed).unwrap();
            let mut tape = Tape::new();
            let mut rng = shiftreg::rng::seeded(seed, shiftreg::rng::Stream::Dropout);
            let fwd = model.forward(&mut tape, &inputs, true, &mut rng).unwrap();
            let rows: Vec<usize> = (0..25).collect();
            let loss = tape
                .softmax_cross_entropy(fwd.logits, g.labels(), &rows)
                .unwrap();
            let grads = tape.backward(loss).unwrap();
            for (v, name) in fwd.params.iter().zip(model.parameter_names()) {
                let grad = grads.get_or_zeros(*v, &tape);
                assert!(
                    grad.data().iter().any(|&x| x != 0.0),
                    "{kind:?} seed {seed}: `{name}` has a zero gradient"
                );
            }
        }
    }
}

#[test]
fn tape_replay_is_bitwise_deterministic() {
    let g = random_graph(3, 30, 0.2, 4, 2);
    let inputs = ModelInputs::new(&g);
    let rows: Vec<usize> = (0..30).collect();
    let run = || {
        let model = Model::init(ModelKind::Appnp, 4, 8, 2, 10, 0.1, 0.5, 9).unwrap();
        let mut tape = Tape::new();
        let mut rng = shiftreg::rng::seeded(9, shiftreg::rng::Stream::Dropout);
        let fwd = model.forward(&mut tape, &inputs, true, &mut rng).unwrap();
        let loss = tape
            .softmax_cross_entropy(fwd.logits, g.labels(), &rows)
            .unwrap();
        let grads = tape.backward(loss).unwrap();
        let g0 = grads.get_or_zeros(fwd.params[0], &tape);
        (tape.value(loss).item().to_bits(), g0)
    };
    assert_eq!(run(), run());
}

#[test]
fn stored_normalization_is_recomputable() {
    for seed in 0..10 {
        let g = random_graph(seed, 30, 0.2, 3, 2);
        assert_eq!(g.norm_adjacency(), &normalize_adjacency(g.adjacency()));
    }
}
