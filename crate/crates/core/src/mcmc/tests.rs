use nalgebra::DMatrix;
use rand::Rng;

use super::*;
use crate::features::{compute_feature_matrix, FeatureMatrix};
use crate::geometry::{DecayFunction, DistanceMatrix, ProximityMatrix};
use crate::likelihood::{collapsed_loglik, DataMatrix, NoiseParams};
use crate::prior::{Dish, PriorState};
use crate::random::{seeded, standard_normal};
use crate::stats;

fn seq_constant(n: usize) -> ProximityMatrix {
    ProximityMatrix::build(&DistanceMatrix::sequential_index(n), &DecayFunction::Constant).unwrap()
}

fn dense_exp(n: usize, beta: f64) -> ProximityMatrix {
    let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
    ProximityMatrix::build(
        &DistanceMatrix::absolute_difference(&times).unwrap(),
        &DecayFunction::Exponential { beta },
    )
    .unwrap()
}

fn flat_config(seed: u64) -> McmcConfig {
    McmcConfig {
        iterations: 100,
        seed,
        update: UpdateFlags {
            alpha: false,
            noise: false,
            missing: false,
        },
        initial_alpha: Some(2.0),
        ..McmcConfig::default()
    }
}

/// `X = Z W + noise` for a fixed two-feature `Z`.
fn synthetic(n: usize, m: usize, seed: u64) -> DataMatrix {
    let mut rng = seeded(seed);
    let w = DMatrix::from_fn(2, m, |_, _| 2.0 * standard_normal(&mut rng));
    let x = DMatrix::from_fn(n, m, |i, j| {
        let z0 = if i < n / 2 { 1.0 } else { 0.0 };
        let z1 = if i % 3 == 0 { 1.0 } else { 0.0 };
        z0 * w[(0, j)] + z1 * w[(1, j)] + 0.3 * standard_normal(&mut rng)
    });
    DataMatrix::new(x).unwrap()
}

#[test]
fn alpha_conditional_substitution() {
    let sampler = Sampler::new(seq_constant(2), McmcConfig::default()).unwrap();
    let prior = PriorState::from_dishes(
        2,
        vec![Dish {
            owner: 0,
            links: vec![0, 0],
        }],
    )
    .unwrap();
    let post = sampler.alpha_conditional(&prior);
    assert_eq!((post.shape, post.rate), (2.0, 2.5));
    let empty = sampler.alpha_conditional(&PriorState::empty(2));
    assert_eq!((empty.shape, empty.rate), (1.0, 2.5));
}

#[test]
fn alpha_draws_match_gamma_mean() {
    let sampler = Sampler::new(seq_constant(3), McmcConfig::default()).unwrap();
    let mut rng = seeded(5);
    let mut state = sampler.initial_state(None, &mut rng).unwrap();
    let post = sampler.alpha_conditional(&state.prior);
    let draws: Vec<f64> = (0..100_000)
        .map(|_| {
            sampler.gibbs_alpha(&mut state, &mut rng);
            state.alpha
        })
        .collect();
    let target = post.shape / post.rate;
    assert!((stats::mean(&draws) - target).abs() < 3.0 * stats::standard_error(&draws));
}

#[test]
fn flat_likelihood_links_follow_prior() {
    let a = dense_exp(4, 0.7);
    let sampler = Sampler::new(a.clone(), flat_config(1)).unwrap();
    let prior = PriorState::from_dishes(
        4,
        vec![Dish {
            owner: 1,
            links: vec![0, 1, 2, 3],
        }],
    )
    .unwrap();
    let mut state = sampler.state_from_parts(prior, 2.0, NoiseParams::default(), None).unwrap();
    let mut rng = seeded(2);
    let draws = 100_000;
    for i in [0, 1] {
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            sampler.gibbs_connection(&mut state, i, 0, &mut rng).unwrap();
            counts[state.prior.link(i, 0)] += 1;
        }
        for (j, &c) in counts.iter().enumerate() {
            let p = a.a(i, j);
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((c as f64 / draws as f64 - p).abs() < 4.0 * se, "i={i} j={j}");
        }
    }
}

#[test]
fn owner_link_update_keeps_features() {
    let a = dense_exp(3, 0.5);
    let data = synthetic(3, 2, 3);
    let sampler = Sampler::new(a, McmcConfig::default()).unwrap();
    let prior = PriorState::from_dishes(
        3,
        vec![Dish {
            owner: 0,
            links: vec![1, 0, 2],
        }],
    )
    .unwrap();
    let mut state = sampler.state_from_parts(prior, 1.0, NoiseParams::default(), Some(data)).unwrap();
    let z = state.z.clone();
    let ll = state.log_lik;
    let mut rng = seeded(3);
    for _ in 0..100 {
        sampler.gibbs_connection(&mut state, 0, 0, &mut rng).unwrap();
        assert_eq!(state.z, z);
        assert_eq!(state.log_lik, ll);
    }
}

/// Enumerate `c_ik` over all targets with the rest fixed and compare with
/// the empirical conditional of the Gibbs update.
#[test]
fn connection_conditional_matches_enumeration() {
    let a = dense_exp(3, 0.4);
    let data = synthetic(3, 3, 4);
    let noise = NoiseParams::new(0.5, 1.5).unwrap();
    let sampler = Sampler::new(a.clone(), McmcConfig::default()).unwrap();
    let base = PriorState::from_dishes(
        3,
        vec![
            Dish {
                owner: 0,
                links: vec![0, 2, 1],
            },
            Dish {
                owner: 2,
                links: vec![0, 1, 2],
            },
        ],
    )
    .unwrap();
    let (i, k) = (1, 0);
    let mut weights = [0.0; 3];
    for (j, w) in weights.iter_mut().enumerate() {
        let mut s = base.clone();
        s.set_link(i, k, j);
        let ll = collapsed_loglik(&data, &compute_feature_matrix(&s), &noise).unwrap();
        *w = a.a(i, j) * ll.exp();
    }
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();

    let mut state = sampler.state_from_parts(base, 1.0, noise, Some(data)).unwrap();
    let mut rng = seeded(5);
    let draws = 100_000;
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        sampler.gibbs_connection(&mut state, i, k, &mut rng).unwrap();
        counts[state.prior.link(i, k)] += 1;
        let fresh = collapsed_loglik(state.data.as_ref().unwrap(), &state.z, &noise).unwrap();
        assert!((fresh - state.log_lik).abs() < 1e-9);
    }
    for j in 0..3 {
        let p = probs[j];
        let se = (p * (1.0 - p) / draws as f64).sqrt().max(1e-12);
        assert!((counts[j] as f64 / draws as f64 - p).abs() < 4.0 * se, "j={j} p={p} counts={counts:?}");
    }
}

#[test]
fn identical_ownership_proposal_is_accepted() {
    // alpha so small that every proposal keeps lambda = 0
    let data = synthetic(4, 2, 6);
    let config = McmcConfig {
        initial_alpha: Some(1e-12),
        ..McmcConfig::default()
    };
    let sampler = Sampler::new(dense_exp(4, 1.0), config).unwrap();
    let mut state = sampler
        .state_from_parts(PriorState::empty(4), 1e-12, NoiseParams::default(), Some(data))
        .unwrap();
    let mut rng = seeded(7);
    for _ in 0..100 {
        assert!(sampler.mh_ownership(&mut state, &mut rng).unwrap());
        assert_eq!(state.prior.k(), 0);
    }
}

#[test]
fn flat_likelihood_always_accepts_ownership() {
    let sampler = Sampler::new(dense_exp(5, 0.5), flat_config(8)).unwrap();
    let mut rng = seeded(8);
    let mut state = sampler.initial_state(None, &mut rng).unwrap();
    for _ in 0..10_000 {
        assert!(sampler.mh_ownership(&mut state, &mut rng).unwrap());
    }
}

#[test]
fn prior_chain_recovers_dish_count_distribution() {
    let a = dense_exp(4, 0.8);
    let rate = 2.0 * a.inverse_h_sum();
    let mut config = flat_config(9);
    config.iterations = 100_000;
    let out = Sampler::new(a, config).unwrap().run(None).unwrap();
    let ks: Vec<u64> = out.records.iter().map(|r| r.k as u64).collect();
    let t = stats::chi_square_poisson(&ks, rate);
    assert!(t.p_value > 0.01, "{t:?}");
}

#[test]
fn rejected_ownership_leaves_state_untouched() {
    let data = synthetic(8, 3, 10);
    let sampler = Sampler::new(dense_exp(8, 1.0), McmcConfig::default()).unwrap();
    let mut rng = seeded(10);
    let mut state = sampler.initial_state(Some(data), &mut rng).unwrap();
    let mut rejected = 0;
    for _ in 0..200 {
        let before = state.clone();
        if !sampler.mh_ownership(&mut state, &mut rng).unwrap() {
            assert_eq!(state, before);
            rejected += 1;
        }
    }
    assert!(rejected > 0);
}

#[test]
fn zero_noise_scale_freezes_noise() {
    let config = McmcConfig {
        noise_proposal_scale: 0.0,
        iterations: 50,
        ..McmcConfig::default()
    };
    let out = Sampler::new(dense_exp(6, 1.0), config)
        .unwrap()
        .run(Some(synthetic(6, 2, 11)))
        .unwrap();
    assert!(out.records.iter().all(|r| r.sigma_x == 1.0 && r.sigma_w == 1.0));
}

#[test]
fn flat_chain_recovers_noise_hyperprior() {
    let config = McmcConfig {
        iterations: 100_000,
        noise_proposal_scale: 3.0,
        update: UpdateFlags {
            alpha: false,
            noise: true,
            missing: false,
        },
        initial_alpha: Some(0.5),
        seed: 12,
        ..McmcConfig::default()
    };
    let out = Sampler::new(dense_exp(2, 1.0), config).unwrap().run(None).unwrap();
    // thin to break up the random-walk autocorrelation
    let logs: Vec<f64> = out.records.iter().step_by(10).map(|r| r.sigma_x.ln()).collect();
    let t = stats::ks_test(&logs, |x| stats::normal_cdf(x, 0.0, NOISE_HYPERPRIOR_LOG_SD));
    assert!(t.p_value > 0.01, "{t:?}");
}

#[test]
fn noise_acceptance_rate_in_range() {
    let config = McmcConfig {
        iterations: 300,
        seed: 13,
        ..McmcConfig::default()
    };
    let out = Sampler::new(dense_exp(12, 1.0), config)
        .unwrap()
        .run(Some(synthetic(12, 3, 13)))
        .unwrap();
    let rate = out.acceptance.noise_rate();
    assert!(rate > 0.1 && rate < 0.9, "rate {rate}");
}

#[test]
fn cached_log_joint_matches_recomputation() {
    let sampler = Sampler::new(dense_exp(7, 0.8), McmcConfig::default()).unwrap();
    let mut rng = seeded(14);
    let mut rows: Vec<Vec<Option<f64>>> = (0..7)
        .map(|_| (0..3).map(|_| Some(standard_normal(&mut rng))).collect())
        .collect();
    rows[2][1] = None;
    rows[5][0] = None;
    let data = DataMatrix::from_rows(&rows).unwrap();
    let mut state = sampler.initial_state(Some(data), &mut rng).unwrap();
    let mut counts = AcceptanceCounts::default();
    for _ in 0..30 {
        sampler.sweep(&mut state, &mut rng, &mut counts).unwrap();
        let fresh = sampler.log_joint(&state).unwrap();
        assert!((fresh - state.log_joint).abs() < 1e-8 * (1.0 + fresh.abs()));
        state.prior.check_invariants().unwrap();
    }
}

#[test]
fn runs_are_deterministic() {
    let config = McmcConfig {
        iterations: 40,
        seed: 15,
        ..McmcConfig::default()
    };
    let sampler = Sampler::new(dense_exp(6, 1.0), config).unwrap();
    let a = sampler.run(Some(synthetic(6, 2, 15))).unwrap();
    let b = sampler.run(Some(synthetic(6, 2, 15))).unwrap();
    assert_eq!(a.records, b.records);
}

#[test]
fn zero_iterations_returns_initial_state() {
    let config = McmcConfig {
        iterations: 0,
        ..McmcConfig::default()
    };
    let sampler = Sampler::new(dense_exp(5, 1.0), config).unwrap();
    let out = sampler.run(Some(synthetic(5, 2, 16))).unwrap();
    assert!(out.records.is_empty());
    assert_eq!(out.map_iteration, None);
    assert_eq!(out.map, out.last);
}

#[test]
fn map_is_best_visited_state() {
    let config = McmcConfig {
        iterations: 60,
        seed: 17,
        ..McmcConfig::default()
    };
    let out = Sampler::new(dense_exp(8, 1.0), config)
        .unwrap()
        .run(Some(synthetic(8, 2, 17)))
        .unwrap();
    let best = out.records.iter().map(|r| r.log_joint).fold(f64::NEG_INFINITY, f64::max);
    assert!(out.map.log_joint >= best);
}

#[test]
fn checkpoint_resume_is_seamless() {
    let data = synthetic(6, 2, 18);
    let full = McmcConfig {
        iterations: 30,
        seed: 18,
        ..McmcConfig::default()
    };
    let half = McmcConfig {
        iterations: 12,
        ..full.clone()
    };
    let whole = Sampler::new(dense_exp(6, 1.0), full.clone()).unwrap().run(Some(data.clone())).unwrap();
    let first = Sampler::new(dense_exp(6, 1.0), half).unwrap().run(Some(data)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.json");
    first.checkpoint().save(&path).unwrap();
    let restored = Checkpoint::load(&path).unwrap();
    assert_eq!(restored, first.checkpoint());
    let mut sink = Vec::new();
    let rest = Sampler::new(dense_exp(6, 1.0), full)
        .unwrap()
        .resume(restored, 18, &mut sink)
        .unwrap();
    let stitched: Vec<SampleRecord> = first.records.into_iter().chain(rest.records).collect();
    assert_eq!(stitched, whole.records);
}

#[test]
fn json_lines_round_trip() {
    let config = McmcConfig {
        iterations: 5,
        record_features: true,
        ..McmcConfig::default()
    };
    let sampler = Sampler::new(dense_exp(4, 1.0), config).unwrap();
    let mut sink = JsonLinesSink::new(Vec::new());
    let out = sampler.run_with_sink(Some(synthetic(4, 2, 19)), &mut sink).unwrap();
    let bytes = sink.into_inner();
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text.lines().count(), 5);
    let parsed: Vec<SampleRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed, out.records);
    assert!(parsed[0].z.is_some());
}

#[test]
fn imputation_moves_only_masked_cells() {
    let mut rng = seeded(20);
    let mut rows: Vec<Vec<Option<f64>>> = (0..6)
        .map(|_| (0..2).map(|_| Some(rng.random::<f64>())).collect())
        .collect();
    let observed = rows.clone();
    rows[3][1] = None;
    let config = McmcConfig {
        iterations: 10,
        ..McmcConfig::default()
    };
    let out = Sampler::new(dense_exp(6, 1.0), config)
        .unwrap()
        .run(Some(DataMatrix::from_rows(&rows).unwrap()))
        .unwrap();
    let x = out.last.data.unwrap();
    for i in 0..6 {
        for j in 0..2 {
            if (i, j) != (3, 1) {
                assert_eq!(Some(x.values()[(i, j)]), observed[i][j]);
            }
        }
    }
}

/// Successive-conditional simulation: sweep on the current data, then redraw
/// the data from the model given the new `Z`. The marginal of `Z` must stay
/// the prior.
fn geweke_with_data(ownership: OwnershipScan, seed: u64) {
    let a = dense_exp(3, 0.7);
    let config = McmcConfig {
        iterations: 1,
        seed,
        update: UpdateFlags {
            alpha: false,
            noise: false,
            missing: false,
        },
        initial_alpha: Some(1.5),
        ownership,
        ..McmcConfig::default()
    };
    let noise = config.initial_noise;
    let sampler = Sampler::new(a.clone(), config).unwrap();
    let mut rng = seeded(seed);
    let draw_x = |z: &FeatureMatrix, rng: &mut crate::random::ChainRng| {
        let w = DMatrix::from_fn(z.n_cols(), 2, |_, _| noise.sigma_w * standard_normal(rng));
        DataMatrix::new(DMatrix::from_fn(3, 2, |i, j| {
            let signal: f64 = (0..z.n_cols()).filter(|&c| z.get(i, c)).map(|c| w[(c, j)]).sum();
            signal + noise.sigma_x * standard_normal(rng)
        }))
        .unwrap()
    };
    let mut state = sampler.initial_state(None, &mut rng).unwrap();
    let x0 = draw_x(&state.z, &mut rng);
    state.data = Some(x0);
    state.log_lik = sampler.log_likelihood(state.data.as_ref(), &state.z, &state.noise).unwrap();
    sampler.refresh_log_joint(&mut state).unwrap();

    let sweeps = 40_000;
    let mut counts = AcceptanceCounts::default();
    let (mut sc_k, mut sc_nnz) = (Vec::with_capacity(sweeps), Vec::with_capacity(sweeps));
    for _ in 0..sweeps {
        sampler.sweep(&mut state, &mut rng, &mut counts).unwrap();
        state.data = Some(draw_x(&state.z, &mut rng));
        state.log_lik = sampler.log_likelihood(state.data.as_ref(), &state.z, &state.noise).unwrap();
        sampler.refresh_log_joint(&mut state).unwrap();
        sc_k.push(state.prior.k() as f64);
        sc_nnz.push(state.z.column_sums().iter().sum::<usize>() as f64);
    }
    let (mut fw_k, mut fw_nnz) = (Vec::new(), Vec::new());
    for _ in 0..sweeps {
        let p = crate::prior::sample_prior(&a, 1.5, &mut rng).unwrap();
        fw_nnz.push(compute_feature_matrix(&p).column_sums().iter().sum::<usize>() as f64);
        fw_k.push(p.k() as f64);
    }
    for (sc, fw) in [(&sc_k, &fw_k), (&sc_nnz, &fw_nnz)] {
        let se = (stats::batch_means_se(sc, 100).powi(2) + stats::standard_error(fw).powi(2)).sqrt();
        let z = (stats::mean(sc) - stats::mean(fw)).abs() / se;
        assert!(z < 4.0, "{ownership:?}: {} vs {} ({z:.2} SE)", stats::mean(sc), stats::mean(fw));
    }
    assert!(counts.ownership_rate() > 0.05 && counts.ownership_rate() < 1.0);
}

#[test]
fn geweke_with_data_joint_ownership() {
    geweke_with_data(OwnershipScan::Joint, 21);
}

#[test]
fn geweke_with_data_per_customer_ownership() {
    geweke_with_data(OwnershipScan::PerCustomer, 22);
}
