mod common;

use common::*;
use ::ncrft::encoders::{PredictionNet, GState};
use ::ncrft::models::oracle::DEFAULT_ORACLE_CAP;
use ::ncrft::models::*;
use ::ncrft::numerics::array::logsumexp;
use ::ncrft::numerics::{grad_check, DenseArray, GradBuffer, ParamStore, RngState};
use proptest::prelude::*;

const DESIGNS: [PotentialDesign; 2] = [PotentialDesign::Additive, PotentialDesign::LogSoftmax];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

#[test]
fn linear_chain_matches_enumeration() {
    let mut rng = RngState::new(1);
    for n in 1..=6 {
        for k in 2..=4 {
            let f = random_scores(n, k, 2.0, &mut rng);
            let t = random_table(k, 2.0, &mut rng);
            let o = lc_brute_force(&f, &t, DEFAULT_ORACLE_CAP).unwrap();
            assert!(rel(lc_log_z(&f, &t).unwrap(), o.log_z) < 1e-9);
            let (y, s) = lc_viterbi(&f, &t).unwrap();
            assert_eq!(y, o.argmax);
            assert!((s - o.max_score).abs() < 1e-9);
        }
    }
}

#[test]
fn transducer_normalizer_and_decode_match_enumeration() {
    let mut rng = RngState::new(2);
    for (seed, design) in DESIGNS.iter().enumerate() {
        for n in 1..=5 {
            for k in 2..=3 {
                let (ids, store) = random_prediction(k, 4, 10 * seed as u64 + n as u64);
                let f = random_scores(n, k, 2.0, &mut rng);
                let o = brute_force_oracle(&store, &ids, &f, *design, DEFAULT_ORACLE_CAP).unwrap();
                let lz = exact_log_z(&store, &ids, &f, *design, DEFAULT_ORACLE_CAP).unwrap();
                assert!(rel(lz, o.log_z) < 1e-9);
                let total: f64 = o.distribution.iter().map(|(_, lp)| lp.exp()).sum();
                assert!((total - 1.0).abs() < 1e-9);
                let net = PredictionNet::new(&store, &ids);
                let width = k.pow(n as u32);
                let (y, s) = beam_search_decode(&net, &f, SetScoring::Global(*design), width, None).unwrap();
                assert_eq!(y, o.argmax);
                assert!((s - o.max_score).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn ties_resolve_like_the_oracle() {
    // zero prediction network and zero scores: every sequence ties
    let (ids, mut store) = random_prediction(3, 4, 5);
    for (_, p) in store.iter_mut() {
        p.value.fill(0.0);
    }
    let f = DenseArray::zeros(&[3, 3]);
    for design in DESIGNS {
        let o = brute_force_oracle(&store, &ids, &f, design, 1000).unwrap();
        assert_eq!(o.argmax, vec![0, 0, 0]);
        let net = PredictionNet::new(&store, &ids);
        for width in [1, 2, 5, 27] {
            let (y, _) = beam_search_decode(&net, &f, SetScoring::Global(design), width, None).unwrap();
            assert_eq!(y, vec![0, 0, 0]);
        }
    }
    let (y, _) = lc_viterbi(&f, &TransitionTable::zeros(3)).unwrap();
    assert_eq!(y, vec![0, 0, 0]);
}

#[test]
fn zero_prediction_network_additive_potential_is_zero() {
    let (ids, mut store) = random_prediction(3, 4, 6);
    for (_, p) in store.iter_mut() {
        p.value.fill(0.0);
    }
    let f = DenseArray::zeros(&[4, 3]);
    for y in enumerate_sequences(4, 3) {
        assert_eq!(ncrft_sequence_potential(&store, &ids, &f, &y, PotentialDesign::Additive).unwrap(), 0.0);
    }
    let o = brute_force_oracle(&store, &ids, &f, PotentialDesign::Additive, 1000).unwrap();
    assert!((o.log_z - 4.0 * 3f64.ln()).abs() < 1e-12);
    let f1 = random_scores(1, 3, 1.0, &mut RngState::new(3));
    let o = brute_force_oracle(&store, &ids, &f1, PotentialDesign::Additive, 1000).unwrap();
    assert!((o.log_z - logsumexp(f1.row(0))).abs() < 1e-12);
}

#[test]
fn greedy_beam_takes_per_step_argmax() {
    let (ids, store) = random_prediction(3, 4, 7);
    let f = random_scores(5, 3, 1.5, &mut RngState::new(8));
    let net = PredictionNet::new(&store, &ids);
    for design in DESIGNS {
        let (y, _) = beam_search_decode(&net, &f, SetScoring::Global(design), 1, None).unwrap();
        let mut st = net.start().unwrap();
        for (i, &label) in y.iter().enumerate() {
            let (phi, psi) = ncrft_potentials(f.row(i), &net.scores(&st.h), design);
            let step: Vec<f64> = phi.iter().zip(&psi).map(|(a, b)| a + b).collect();
            assert_eq!(label, ::ncrft::numerics::array::argmax(&step));
            st = net.advance(&st, label).unwrap();
        }
    }
}

// Not a property of beam search in general; checked on seeded instances.
#[test]
fn wider_beams_never_score_lower() {
    let mut rng = RngState::new(1);
    for seed in 0..120u64 {
        let k = 2 + rng.below(3) as usize;
        let n = 2 + rng.below(5) as usize;
        let (ids, store) = random_prediction(k, 4, 100 + seed);
        let net = PredictionNet::new(&store, &ids);
        let f = random_scores(n, k, 2.0, &mut rng);
        for design in DESIGNS {
            let mut prev = f64::NEG_INFINITY;
            for b in 1..=k.pow(n as u32).min(64) {
                let (_, s) = beam_search_decode(&net, &f, SetScoring::Global(design), b, None).unwrap();
                assert!(s >= prev - 1e-12, "seed {} width {}: {} < {}", seed, b, s, prev);
                prev = s;
            }
        }
    }
}

#[test]
fn beam_entries_recompute_from_scratch() {
    let (ids, store) = random_prediction(3, 5, 9);
    let f = random_scores(5, 3, 1.5, &mut RngState::new(10));
    let net = PredictionNet::new(&store, &ids);
    for design in DESIGNS {
        let out = beam_search(&net, &f, SetScoring::Global(design), 4, None, None).unwrap();
        let o = brute_force_oracle(&store, &ids, &f, design, 1000).unwrap();
        assert!(out.beam.entries.len() <= 4);
        for w in out.beam.entries.windows(2) {
            assert!(w[0].score >= w[1].score);
        }
        for e in &out.beam.entries {
            let u = ncrft_sequence_potential(&store, &ids, &f, &e.prefix, design).unwrap();
            assert!((u - e.score).abs() < 1e-9);
            assert!(e.score <= o.max_score + 1e-12);
            let mut st = net.start().unwrap();
            for &l in &e.prefix {
                st = net.advance(&st, l).unwrap();
            }
            assert_eq!(st, e.state);
        }
    }
}

#[test]
fn potential_recurrence() {
    let (ids, store) = random_prediction(3, 4, 11);
    let f = random_scores(4, 3, 1.0, &mut RngState::new(12));
    let y = [2, 0, 1, 1];
    for design in DESIGNS {
        let full = ncrft_sequence_potential(&store, &ids, &f, &y, design).unwrap();
        let head = {
            let sub = DenseArray::from_vec(&[3, 3], f.values()[..9].to_vec()).unwrap();
            ncrft_sequence_potential(&store, &ids, &sub, &y[..3], design).unwrap()
        };
        let net = PredictionNet::new(&store, &ids);
        let mut st = net.start().unwrap();
        for &l in &y[..3] {
            st = net.advance(&st, l).unwrap();
        }
        let (phi, psi) = ncrft_potentials(f.row(3), &net.scores(&st.h), design);
        assert!((full - (head + phi[1] + psi[1])).abs() < 1e-9);
    }
    assert!(ncrft_sequence_potential(&store, &ids, &f, &[0, 3, 0, 0], PotentialDesign::Additive).is_err());
}

#[test]
fn early_update_equals_exact_when_beam_is_exhaustive() {
    let mut rng = RngState::new(13);
    for design in DESIGNS {
        for seed in 0..5 {
            let (ids, store) = random_prediction(3, 4, 100 + seed);
            let f = random_scores(3, 3, 2.0, &mut rng);
            let gold: Vec<usize> = (0..3).map(|_| rng.below(3) as usize).collect();
            let o = brute_force_oracle(&store, &ids, &f, design, 1000).unwrap();
            let exact = o.log_z - ncrft_sequence_potential(&store, &ids, &f, &gold, design).unwrap();
            let mut g = GradBuffer::for_store(&store);
            let eu = early_update_loss(&store, &ids, &f, &gold, design, 27, &mut g).unwrap();
            assert_eq!(eu.set.fell_out_at, None);
            assert!((eu.loss - exact).abs() < 1e-9);
        }
    }
}

#[test]
fn saturated_gold_never_falls_out() {
    let (ids, store) = random_prediction(3, 4, 14);
    let gold = [1, 2, 0, 0, 2];
    let mut f = DenseArray::filled(&[5, 3], -25.0);
    for (i, &y) in gold.iter().enumerate() {
        f.set(i, y, 25.0);
    }
    for design in DESIGNS {
        let mut g = GradBuffer::for_store(&store);
        let eu = early_update_loss(&store, &ids, &f, &gold, design, 2, &mut g).unwrap();
        assert_eq!(eu.set.fell_out_at, None);
        assert!(eu.loss < 1e-6 && eu.loss >= 0.0);
    }
}

#[test]
fn early_update_stops_where_gold_leaves_the_beam() {
    let (ids, store) = random_prediction(3, 4, 15);
    // gold label 2 at position 2 is strongly disfavored
    let mut f = DenseArray::zeros(&[4, 3]);
    f.set(1, 2, -40.0);
    let gold = [0, 2, 1, 1];
    let mut g = GradBuffer::for_store(&store);
    let eu = early_update_loss(&store, &ids, &f, &gold, PotentialDesign::Additive, 2, &mut g).unwrap();
    assert_eq!(eu.set.fell_out_at, Some(2));
    assert_eq!(eu.set.gold, vec![0, 2]);
    assert_eq!(eu.set.others.len(), 2);
    assert!(eu.loss > 30.0);
    assert!(eu.df.row(2).iter().chain(eu.df.row(3)).all(|&v| v == 0.0));
}

#[test]
fn node_shift_invariance() {
    let (ids, store) = random_prediction(3, 4, 16);
    let mut rng = RngState::new(17);
    let f = random_scores(4, 3, 1.0, &mut rng);
    let mut shifted = f.clone();
    for i in 0..4 {
        let c = rng.uniform(-5.0, 5.0);
        shifted.row_mut(i).iter_mut().for_each(|v| *v += c);
    }
    let a = brute_force_oracle(&store, &ids, &f, PotentialDesign::Additive, 1000).unwrap();
    let b = brute_force_oracle(&store, &ids, &shifted, PotentialDesign::Additive, 1000).unwrap();
    for ((ya, pa), (yb, pb)) in a.distribution.iter().zip(&b.distribution) {
        assert_eq!(ya, yb);
        assert!((pa - pb).abs() < 1e-9);
    }
}

#[test]
fn designs_are_different_models() {
    let (ids, store) = random_prediction(3, 4, 18);
    let f = random_scores(3, 3, 1.0, &mut RngState::new(19));
    let a = brute_force_oracle(&store, &ids, &f, PotentialDesign::Additive, 1000).unwrap();
    let b = brute_force_oracle(&store, &ids, &f, PotentialDesign::LogSoftmax, 1000).unwrap();
    let gap = a
        .distribution
        .iter()
        .zip(&b.distribution)
        .map(|((_, p), (_, q))| (p - q).abs())
        .fold(0.0, f64::max);
    assert!(gap > 1e-3);
}

#[test]
fn zero_parameter_rnnt_loss_is_n_log_k() {
    let (model, mut store) = tiny_model(ModelKind::Rnnt, PotentialDesign::Additive, 3, 4, 20);
    for (_, p) in store.iter_mut() {
        p.value.fill(0.0);
    }
    let s = random_sentence(4, 3, &mut RngState::new(21));
    let mut g = GradBuffer::for_store(&store);
    let l = model
        .sentence_loss(&store, &s, Objective::Exact { cap: 100 }, None, &mut g)
        .unwrap();
    assert!((l.loss - 4.0 * 3f64.ln()).abs() < 1e-12);
}

#[test]
fn rnnt_step_probabilities_normalize() {
    let mut rng = RngState::new(22);
    for k in 1..6 {
        let f: Vec<f64> = (0..k).map(|_| rng.uniform(-30.0, 30.0)).collect();
        let g: Vec<f64> = (0..k).map(|_| rng.uniform(-30.0, 30.0)).collect();
        let total: f64 = rnnt_step_log_probs(&f, &g).unwrap().iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

fn check_model_gradient(kind: ModelKind, design: PotentialDesign, objective: Objective, seed: u64) -> f64 {
    let (model, mut store) = tiny_model(kind, design, 3, 4, seed);
    let s = random_sentence(3, 3, &mut RngState::new(seed + 1));
    let report = grad_check(
        |p: &ParamStore, g: &mut GradBuffer| Ok(model.sentence_loss(p, &s, objective, None, g)?.loss),
        &mut store,
        1e-5,
        64,
        &mut RngState::new(seed + 2),
    )
    .unwrap();
    report.max_relative_error
}

#[test]
fn full_model_gradients() {
    for seed in [1, 2] {
        assert!(check_model_gradient(ModelKind::LinearChain, PotentialDesign::Additive, Objective::Exact { cap: 100 }, seed) < 1e-4);
        assert!(check_model_gradient(ModelKind::Rnnt, PotentialDesign::Additive, Objective::Exact { cap: 100 }, seed) < 1e-4);
        for design in DESIGNS {
            assert!(check_model_gradient(ModelKind::Ncrft, design, Objective::Exact { cap: 100 }, seed) < 1e-4);
        }
    }
}

// Every coordinate, with an absolute floor for gradients near round-off.
#[test]
fn every_coordinate_within_floor() {
    for kind in [ModelKind::LinearChain, ModelKind::Rnnt, ModelKind::Ncrft] {
        let (model, mut store) = tiny_model(kind, PotentialDesign::LogSoftmax, 3, 4, 7);
        let s = random_sentence(3, 3, &mut RngState::new(8));
        let objective = Objective::Exact { cap: 100 };
        let mut g = GradBuffer::for_store(&store);
        model.sentence_loss(&store, &s, objective, None, &mut g).unwrap();
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let analytic = g.to_dense(id);
            for k in 0..analytic.len() {
                let orig = store.value(id).values()[k];
                let at = |v: f64, st: &mut ParamStore| {
                    st.value_mut(id).values_mut()[k] = v;
                    let mut scratch = GradBuffer::for_store(st);
                    model.sentence_loss(st, &s, objective, None, &mut scratch).unwrap().loss
                };
                let numeric = (at(orig + 1e-5, &mut store) - at(orig - 1e-5, &mut store)) / 2e-5;
                store.value_mut(id).values_mut()[k] = orig;
                let a = analytic[k];
                assert!(
                    (a - numeric).abs() <= 1e-4 * (a.abs() + numeric.abs()) + 1e-9,
                    "{} {}[{}]: {} vs {}",
                    kind,
                    store.name(id),
                    k,
                    a,
                    numeric
                );
            }
        }
    }
}

#[test]
fn frozen_beam_gradient() {
    let (model, mut store) = tiny_model(ModelKind::Ncrft, PotentialDesign::LogSoftmax, 3, 4, 31);
    let s = random_sentence(4, 3, &mut RngState::new(32));
    let gold = s.labels.clone().unwrap();
    let f = model.transcribe(&store, &s, None).unwrap().scores;
    let net = model.prediction_net(&store).unwrap();
    let set = early_update_set(&net, &f, &gold, SetScoring::Global(model.design), 2).unwrap();
    let ids = model.prediction.clone().unwrap();
    let report = grad_check(
        |p: &ParamStore, g: &mut GradBuffer| {
            let tape = model.transcribe(p, &s, None)?;
            let r = set_nll(p, &ids, &tape.scores, &set.gold, &set.others, SetScoring::Global(model.design), g)?;
            ::ncrft::encoders::transcription_backward(p, &model.transcription, &model.config, &tape, &r.df, g);
            Ok(r.loss)
        },
        &mut store,
        1e-5,
        usize::MAX,
        &mut RngState::new(33),
    )
    .unwrap();
    assert!(report.max_relative_error < 1e-4, "{:?}", report);
}

#[test]
fn masked_decoding_respects_bioes() {
    let labels = ["O", "B-X", "I-X", "E-X", "S-X"];
    let mask = TransitionMask::from_labels(&labels);
    let mut rng = RngState::new(40);
    let (ids, store) = random_prediction(5, 4, 41);
    let net = PredictionNet::new(&store, &ids);
    for _ in 0..20 {
        let f = random_scores(6, 5, 3.0, &mut rng);
        let t = random_table(5, 3.0, &mut rng);
        let (a, _) = ::ncrft::models::linear_chain::lc_viterbi_masked(&f, &t, Some(&mask)).unwrap();
        let (b, _) = beam_search_decode(&net, &f, SetScoring::Global(PotentialDesign::Additive), 8, Some(&mask)).unwrap();
        for y in [a, b] {
            assert!(mask.start_allowed(y[0]) && mask.end_allowed(y[5]));
            assert!(y.windows(2).all(|w| mask.allowed(w[0], w[1])));
        }
    }
}

#[test]
fn checkpoint_eval_matches_in_memory_eval() {
    let (model, mut store) = tiny_model(ModelKind::Ncrft, PotentialDesign::LogSoftmax, 3, 4, 50);
    ::ncrft::models::checkpoint::round_to_f32(&mut store);
    let bytes = ModelCheckpoint::new(&model, &store).to_bytes().unwrap();
    let back = ModelCheckpoint::from_bytes(&bytes).unwrap();
    let m2 = back.model().unwrap();
    let mut rng = RngState::new(51);
    for _ in 0..5 {
        let s = random_sentence(4, 3, &mut rng);
        assert_eq!(model.exact_nll(&store, &s, 100).unwrap(), m2.exact_nll(&back.params, &s, 100).unwrap());
        assert_eq!(model.decode(&store, &s, 4, None).unwrap(), m2.decode(&back.params, &s, 4, None).unwrap());
    }
}

#[test]
fn fresh_state_helper_is_consistent() {
    let (ids, store) = random_prediction(2, 3, 60);
    let net = PredictionNet::new(&store, &ids);
    let z = net.zero_state();
    assert_eq!(z, GState { h: vec![0.0; 3], c: vec![0.0; 3] });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn early_update_loss_is_non_negative(seed in 0u64..10_000, n in 1usize..6, k in 2usize..4, width in 1usize..6, logsm in any::<bool>()) {
        let design = if logsm { PotentialDesign::LogSoftmax } else { PotentialDesign::Additive };
        let (ids, store) = random_prediction(k, 3, seed);
        let mut rng = RngState::new(seed);
        let f = random_scores(n, k, 3.0, &mut rng);
        let gold: Vec<usize> = (0..n).map(|_| rng.below(k as u64) as usize).collect();
        let mut g = GradBuffer::for_store(&store);
        let eu = early_update_loss(&store, &ids, &f, &gold, design, width, &mut g).unwrap();
        prop_assert!(eu.loss >= 0.0);
        prop_assert!(eu.set.others.len() <= width);
    }

    #[test]
    fn exhaustive_beam_bounds_narrow_beams(seed in 0u64..10_000, n in 1usize..5, k in 2usize..4, width in 1usize..8) {
        let (ids, store) = random_prediction(k, 3, seed);
        let f = random_scores(n, k, 2.0, &mut RngState::new(seed + 7));
        let net = PredictionNet::new(&store, &ids);
        let full = k.pow(n as u32);
        for design in DESIGNS {
            let (_, narrow) = beam_search_decode(&net, &f, SetScoring::Global(design), width, None).unwrap();
            let (_, best) = beam_search_decode(&net, &f, SetScoring::Global(design), full, None).unwrap();
            prop_assert!(narrow <= best + 1e-12);
        }
    }

    #[test]
    fn lc_log_z_bounds(seed in 0u64..10_000, n in 1usize..7, k in 1usize..5) {
        let mut rng = RngState::new(seed);
        let f = random_scores(n, k, 5.0, &mut rng);
        let t = random_table(k, 5.0, &mut rng);
        let (_, best) = lc_viterbi(&f, &t).unwrap();
        let lz = lc_log_z(&f, &t).unwrap();
        prop_assert!(lz >= best - 1e-9);
        prop_assert!(lz <= best + (n as f64) * (k as f64).ln() + 1e-9);
    }
}
