use hbf_papr::hbf::build_precoder;
use hbf_papr::trainer::{ga_train, TrainingSet};
use hbf_papr::{GaConfig, SimConfig};

#[test]
fn default_genes_beat_a_naive_point() {
    let cfg = SimConfig::default();
    let p = build_precoder(cfg.n_ant, cfg.n_dac, cfg.rng_seed).unwrap();
    let ga = GaConfig {
        training_n_ofdm: 4,
        ..GaConfig::default()
    };
    let set = TrainingSet::new(&cfg, p, &ga).unwrap();
    let trained = set.evaluate(&[0.85, 1.76, 1.68]).unwrap();
    let naive = set.evaluate(&[1.0, 1.0, 1.0]).unwrap();
    assert!(trained.fitness <= naive.fitness, "{trained:?} vs {naive:?}");
    assert!(trained.evm <= cfg.evm_budget);
}

#[test]
fn desk_training_is_monotone_and_within_budget() {
    let cfg = SimConfig::desk();
    let p = build_precoder(cfg.n_ant, cfg.n_dac, cfg.rng_seed).unwrap();
    let ga = GaConfig {
        population: 8,
        generations: 6,
        training_n_ofdm: 8,
        ..GaConfig::default()
    };
    let a = ga_train(&cfg, p.clone(), &ga, 2, &[]).unwrap();
    assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
    assert!(a.evm <= cfg.evm_budget);
    assert_eq!(a.fitness, a.papr_db);
    let b = ga_train(&cfg, p, &ga, 2, &[]).unwrap();
    assert_eq!(a, b);
}
