mod common;

use common::{batch_gibbs, bisect_root, mean_var, random_chain, re_dataset, smc_means};
use gittins_core::harness::bootstrap::bootstrap_mean_ci;
use gittins_core::models::random_effects::{gibbs_step, prior_draw, ClusterStats, RePriors};
use gittins_core::models::tabular::TabularChain;
use gittins_core::{
    estimate, exact_zk_sum, solve, DiscountFactor, ReplicationSchedule, SolverConfig, StreamKey, TruncationConfig,
};
use rand_distr::{Distribution, StandardNormal};

#[test]
fn depth_one_estimator_is_unbiased() {
    let mut g = StreamKey::root(11).stream();
    for c in 0..6 {
        let rc = random_chain(&mut g, 4, 3, 6);
        let exact = exact_zk_sum(&rc.chain, &0, rc.nu, &rc.trunc, 1).unwrap();
        let sch = ReplicationSchedule::uniform(1, 1).unwrap();
        let xs: Vec<f64> = (0..4000)
            .map(|s| estimate(&rc.chain, &0, rc.nu, &rc.trunc, &sch, StreamKey::root(c).child(s)).unwrap().raw)
            .collect();
        let (m, v) = mean_var(&xs);
        let se = (v / xs.len() as f64).sqrt();
        assert!((m - exact).abs() <= 3.0 * se + 1e-12, "chain {c}: {m} vs {exact} (se {se})");
    }
}

#[test]
fn depth_two_estimator_is_unbiased() {
    let mut g = StreamKey::root(12).stream();
    for c in 0..4 {
        let rc = random_chain(&mut g, 4, 3, 5);
        let exact = exact_zk_sum(&rc.chain, &0, rc.nu, &rc.trunc, 2).unwrap();
        let sch = ReplicationSchedule::uniform(2, 2).unwrap();
        let xs: Vec<f64> = (0..4000)
            .map(|s| estimate(&rc.chain, &0, rc.nu, &rc.trunc, &sch, StreamKey::root(100 + c).child(s)).unwrap().raw)
            .collect();
        let (m, v) = mean_var(&xs);
        let se = (v / xs.len() as f64).sqrt();
        assert!((m - exact).abs() <= 3.0 * se + 1e-12, "chain {c}: {m} vs {exact} (se {se})");
    }
}

#[test]
fn solver_interval_covers_exact_root() {
    // Two-state chain; the root of the exact depth-one value is the target.
    let chain = TabularChain::new(vec![0.2, 0.9], vec![vec![(0.6, 0), (0.4, 1)], vec![(0.5, 0), (0.5, 1)]]).unwrap();
    let trunc = TruncationConfig::new(6, 0.0, 1.0, DiscountFactor::new(0.8).unwrap()).unwrap();
    let root = bisect_root(0.0, 1.0, 1e-10, |nu| exact_zk_sum(&chain, &0, nu, &trunc, 1).unwrap());
    let sch = ReplicationSchedule::uniform(1, 1).unwrap();
    let cfg = SolverConfig::new(trunc, sch, 0.2, 0.01).unwrap();
    let runs = 200;
    let covered = (0..runs)
        .filter(|&s| {
            let r = solve(&chain, &0, &cfg, s).unwrap();
            (r.nu_final - root).abs() <= r.ci_radius
        })
        .count();
    let rate = covered as f64 / runs as f64;
    assert!(rate >= 0.88, "coverage {rate}");
}

/// With concentrated variance priors and one cluster the posterior of
/// `θ + u_0` is normal with known parameters.
#[test]
fn gibbs_matches_conjugate_normal() {
    let (v1, v2) = (0.5, 0.3);
    let big = 1e7;
    let priors = RePriors {
        theta0: 0.2,
        sigma0_sq: 0.7,
        alpha0: big,
        beta0: (big - 1.0) * v1,
        alpha1: big,
        beta1: (big - 1.0) * v2,
    };
    let mut s = StreamKey::root(5).stream();
    let ys: Vec<f64> = (0..12)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut s);
            1.0 + z
        })
        .collect();
    let prior_var = priors.sigma0_sq + v2;
    let post_prec = 1.0 / prior_var + ys.len() as f64 / v1;
    let post_mean = (priors.theta0 / prior_var + ys.iter().sum::<f64>() / v1) / post_prec;
    let data = ClusterStats::from_data(&ys, &vec![0; ys.len()], 1).unwrap();
    let mut p = prior_draw(&priors, 1, &mut s).unwrap();
    let mut draws = Vec::new();
    for i in 0..60_000 {
        p = gibbs_step(&p, &data, &priors, &mut s).unwrap();
        if i >= 1000 {
            draws.push(p.mean(0));
        }
    }
    let (m, v) = mean_var(&draws);
    assert!((m - post_mean).abs() < 0.01, "{m} vs {post_mean}");
    assert!((v - 1.0 / post_prec).abs() < 0.05 / post_prec, "{v} vs {}", 1.0 / post_prec);
}

#[test]
fn smc_agrees_with_batch_gibbs() {
    let priors = RePriors::default();
    for ds in 0..2 {
        let (ys, cs) = re_dataset(&priors, 3, 15, StreamKey::root(900 + ds));
        let (gm, gse) = batch_gibbs(&ys, &cs, 3, &priors, 2000, 100_000, StreamKey::root(910 + ds));
        let (sm, sse) = smc_means(&ys, &cs, 3, &priors, 100, 20, StreamKey::root(920 + ds));
        for c in 0..3 {
            let se = (gse[c].powi(2) + sse[c].powi(2)).sqrt();
            assert!((gm[c] - sm[c]).abs() <= 3.0 * se, "dataset {ds} cluster {c}: {} vs {} (se {se})", sm[c], gm[c]);
        }
    }
}

#[test]
fn bootstrap_width_matches_clt() {
    let mut s = StreamKey::root(3).stream();
    let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut s)).collect();
    let (lo, hi) = bootstrap_mean_ci(&xs, 0.95, 2000, &mut s).unwrap();
    let w = hi - lo;
    assert!((w - 0.0392).abs() <= 0.2 * 0.0392, "width {w}");
}
