use super::*;
use crate::corpus::{generate_corpus, DomainGrammar};
use crate::nn::max_relative_error;
use rand::Rng;

fn tiny_dims() -> EdaDims {
    EdaDims {
        embedding: 3,
        hidden: 3,
        decoder: 3,
        label_embedding: 2,
        attention: 3,
    }
}

fn inputs() -> EdaInputs {
    EdaInputs {
        spec: FeatureSpec::new([Family::Surface, Family::Pap, Family::MlpConf], 10).unwrap(),
        categories: vec![],
        pos: vec![],
        relations: vec![],
    }
}

fn tiny_model(labels: usize, seed: u64) -> EdaModel {
    let labels = (0..labels)
        .map(|i| if i == 0 { Label::Null } else { Label::Begin(format!("C{i}")) })
        .collect();
    let vocab = ["<unk>", "a", "b", "c", "d"].map(String::from).to_vec();
    let mut m = EdaModel::new(tiny_dims(), labels, vocab, inputs()).unwrap();
    m.init_random(seed);
    // Larger weights make every block's gradient non-trivial.
    m.params_mut().iter_mut().for_each(|v| *v *= 2.0);
    m
}

fn random_example<R: Rng>(rng: &mut R, n: usize, labels: usize) -> EdaExample {
    EdaExample {
        words: (0..n).map(|_| rng.gen_range(0..5)).collect(),
        features: (0..n)
            .map(|_| vec![rng.gen_range(0.0..1.0), 1.0, rng.gen_range(0.0..1.0), 1.0])
            .collect(),
        gold: (0..n).map(|_| rng.gen_range(0..labels)).collect(),
    }
}

#[test]
fn full_gradient_matches_finite_differences() {
    let t0 = std::time::Instant::now();
    let mut rng = seed::rng(7);
    for (n, l) in [(1, 2), (3, 4), (4, 3)] {
        let m = tiny_model(l, 10 + n as u64);
        let ex = random_example(&mut rng, n, l);
        let mut g = vec![0.0; m.params().len()];
        let loss = m.loss_grad(m.params(), &ex, &mut g);
        assert!((loss - m.loss_at(m.params(), &ex)).abs() < 1e-12);
        for (id, block) in m.layout().blocks().iter().enumerate() {
            let idx: Vec<usize> = m.layout().range(id).collect();
            let err = max_relative_error(m.params(), &g, &idx, 1e-4, 1e-7, |p| m.loss_at(p, &ex));
            assert!(err < 1e-3, "block {} (n={n}, l={l}): {err}", block.name);
        }
    }
    assert!(t0.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn zero_parameters_give_zero_annotations() {
    let mut m = tiny_model(3, 1);
    m.params_mut().iter_mut().for_each(|v| *v = 0.0);
    let ex = random_example(&mut seed::rng(1), 4, 3);
    assert!(m.encode(&ex).iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn reversed_input_swaps_annotation_halves() {
    let mut m = tiny_model(3, 2);
    // Tie the backward GRU to the forward one.
    let lay = m.layout().clone();
    let b = m.blocks.clone();
    for (src, dst) in [(b.w_f, b.w_b), (b.u_f, b.u_b), (b.b_f, b.b_b)] {
        let v = lay.slice(m.params(), src).to_vec();
        lay.slice_mut(m.params_mut(), dst).copy_from_slice(&v);
    }
    let ex = random_example(&mut seed::rng(3), 5, 3);
    let mut rev = ex.clone();
    rev.words.reverse();
    rev.features.reverse();
    let a = m.encode(&ex);
    let r = m.encode(&rev);
    let h = 3;
    for i in 0..5 {
        let j = 4 - i;
        for k in 0..h {
            assert!((a[i][k] - r[j][h + k]).abs() < 1e-12);
            assert!((a[i][h + k] - r[j][k]).abs() < 1e-12);
        }
    }
}

#[test]
fn single_word_annotation_is_one_step_each_way() {
    let m = tiny_model(2, 4);
    let ex = random_example(&mut seed::rng(5), 1, 2);
    let ann = m.encode(&ex);
    let mut x = m.layout().row(m.params(), m.blocks.emb, ex.words[0]).to_vec();
    x.extend_from_slice(&ex.features[0]);
    let (f, _) = gru::step(&m.gru(m.params(), m.blocks.w_f, m.blocks.u_f, m.blocks.b_f), &x, &[0.0; 3]);
    let (b, _) = gru::step(&m.gru(m.params(), m.blocks.w_b, m.blocks.u_b, m.blocks.b_b), &x, &[0.0; 3]);
    assert_eq!(ann[0], [f, b].concat());
}

#[test]
fn attention_is_a_distribution() {
    let m = tiny_model(3, 5);
    let mut rng = seed::rng(9);
    for n in 1..6 {
        let ex = random_example(&mut rng, n, 3);
        let ann = m.encode(&ex);
        let s: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (alpha, _) = m.attend(&s, &ann);
        assert!(alpha.iter().all(|a| *a >= 0.0));
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        if n == 1 {
            assert_eq!(alpha, vec![1.0]);
        }
        let same = vec![ann[0].clone(); n];
        let (alpha, c) = m.attend(&s, &same);
        assert!(alpha.iter().all(|a| (a - 1.0 / n as f64).abs() < 1e-12));
        assert!(c.iter().zip(&ann[0]).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

#[test]
fn greedy_output_is_self_consistent() {
    let m = tiny_model(4, 6);
    let ex = random_example(&mut seed::rng(11), 6, 4);
    let (greedy, gsteps) = m.decode(&ex, DecodeMode::Greedy);
    assert_eq!(greedy.len(), 6);
    let (forced, fsteps) = m.decode(&ex, DecodeMode::TeacherForced(&greedy));
    assert_eq!(forced, greedy);
    for (a, b) in gsteps.iter().zip(&fsteps) {
        assert_eq!(a.distribution, b.distribution);
        assert_eq!(argmax(&a.distribution), argmax(&b.distribution));
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let m = tiny_model(3, 7);
    let ex = random_example(&mut seed::rng(12), 4, 3);
    let (_, g) = m.batch_loss_grad(&[&ex]);
    let mut p = m.params().to_vec();
    let mut adam = nn::Adam::new(p.len(), 0.0);
    adam.step(&mut p, &g);
    assert_eq!(p, m.params());
}

#[test]
fn small_steps_do_not_increase_the_loss() {
    let mut m = tiny_model(3, 8);
    let ex = random_example(&mut seed::rng(13), 4, 3);
    let mut last = m.loss_at(m.params(), &ex);
    for _ in 0..20 {
        let (_, g) = m.batch_loss_grad(&[&ex]);
        nn::axpy(m.params_mut(), -0.01, &g);
        let now = m.loss_at(m.params(), &ex);
        assert!(now <= last + 1e-12, "{now} > {last}");
        last = now;
    }
}

fn corpus(n: usize, seed: u64) -> (DomainGrammar, Dataset) {
    let g = DomainGrammar::default_grammar();
    let d = generate_corpus(&g, n, seed, "e").unwrap();
    (g, d)
}

#[test]
fn memorizes_a_single_example() {
    let (g, d) = corpus(1, 3);
    let u = d.utterances[0].clone();
    let data = Dataset::new(vec![u.clone()]).unwrap();
    let hyper = EdaHyper {
        dims: EdaDims {
            embedding: 8,
            hidden: 8,
            decoder: 8,
            label_embedding: 4,
            attention: 8,
        },
        lr: 0.02,
        lr_decay: 1.0,
        epochs: 150,
        min_count: 1,
        ..EdaHyper::default()
    };
    let tr = train_eda(&data, &FeatureSpec::all(), &g.lexicon, &hyper, None).unwrap();
    assert_eq!(tr.model.tag(&u, &g.lexicon).labels, u.labels());
    assert!(tr.epoch_losses.last().unwrap() < &tr.epoch_losses[0]);
}

#[test]
fn step_size_decays_per_epoch() {
    let (g, d) = corpus(20, 6);
    let dims = EdaDims {
        embedding: 4,
        hidden: 4,
        decoder: 4,
        label_embedding: 2,
        attention: 4,
    };
    let base = EdaHyper {
        dims,
        epochs: 1,
        lr_decay: 0.5,
        ..EdaHyper::default()
    };
    // A zero decay freezes every epoch after the first.
    let one = train_eda(&d, &FeatureSpec::all(), &g.lexicon, &base, None).unwrap();
    let frozen = EdaHyper {
        epochs: 3,
        lr_decay: 0.0,
        ..base.clone()
    };
    let three = train_eda(&d, &FeatureSpec::all(), &g.lexicon, &frozen, None).unwrap();
    assert_eq!(one.model.params(), three.model.params());
}

#[test]
fn training_is_bit_reproducible_and_file_round_trips() {
    let (g, d) = corpus(40, 4);
    let hyper = EdaHyper {
        dims: EdaDims {
            embedding: 6,
            hidden: 5,
            decoder: 5,
            label_embedding: 3,
            attention: 4,
        },
        epochs: 2,
        ..EdaHyper::default()
    };
    let spec = FeatureSpec::all();
    let a = train_eda(&d, &spec, &g.lexicon, &hyper, None).unwrap().model;
    let b = train_eda(&d, &spec, &g.lexicon, &hyper, None).unwrap().model;
    let bits = |m: &EdaModel| m.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    let back = EdaModel::parse(&a.format()).unwrap();
    assert_eq!(bits(&back), bits(&a));
    assert_eq!(back.format(), a.format());
    for u in &d.utterances {
        let out = back.tag(u, &g.lexicon);
        assert_eq!(out.labels.len(), u.len());
        assert_eq!(out, a.tag(u, &g.lexicon));
    }
    assert!(EdaModel::parse(&a.format().replace("dims 6", "dims 7")).is_err());
}

#[test]
fn unknown_words_map_to_the_reserved_row() {
    let m = tiny_model(2, 1);
    assert_eq!(m.word_id("zebra"), 0);
    assert_eq!(m.word_id("B"), 2);
}
