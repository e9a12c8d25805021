use groupfair::audit::{audit_dataset, labeller_ppv, proxy_evaluate, Attribute, ALL_LEVELS};
use groupfair::data::{attach_proxies, BiasSpec, ProxySpec};
use groupfair::metrics::{BootstrapConfig, Ensemble, Metric, MetricParams, ScoredSet, Subset};
use rand::{Rng, SeedableRng};

/// `P(gold = 1 | observed = 1)` under a flip channel, from Bayes' rule.
fn ppv_closed_form(p: f64, pos_to_neg: f64, neg_to_pos: f64) -> f64 {
    let tp = p * (1.0 - pos_to_neg);
    tp / (tp + (1.0 - p) * neg_to_pos)
}

#[test]
fn marginals_are_count_weighted_cell_means() {
    let spec = BiasSpec::preset("mimic-age-labelbias").unwrap();
    let d = spec.generate(5_000, 2).unwrap();
    let t = audit_dataset(&d, "group", "sex", &BootstrapConfig { iters: 20, ..Default::default() }).unwrap();
    for m in &t.margin_a {
        let cells: Vec<_> = t.cells.iter().filter(|c| c.a == m.a && c.n > 0).collect();
        let n: usize = cells.iter().map(|c| c.n).sum();
        assert_eq!(n, m.n);
        let weighted: f64 = cells.iter().map(|c| c.ppv.unwrap() * c.n as f64).sum::<f64>() / n as f64;
        assert!((weighted - m.ppv.unwrap()).abs() < 1e-12);
    }
    let total: usize = t.margin_b.iter().map(|c| c.n).sum();
    assert_eq!(total, t.overall.n);
    assert_eq!(t.overall.n, d.samples().iter().filter(|s| s.label).count());
    assert!(t.all_cells().all(|c| c.ppv.is_none_or(|p| (0.0..=1.0).contains(&p))));
}

#[test]
fn group_ppv_matches_generator_within_3se() {
    let spec = BiasSpec::preset("mimic-age-labelbias").unwrap();
    let d = spec.generate(200_000, 5).unwrap();
    let t = audit_dataset(&d, "group", "sex", &BootstrapConfig { iters: 20, ..Default::default() }).unwrap();
    let mut overall_num = 0.0;
    let mut overall_den = 0.0;
    for (g, gs) in spec.groups.iter().enumerate() {
        let want = ppv_closed_form(gs.prevalence, gs.flip.pos_to_neg, gs.flip.neg_to_pos);
        let cell = t.cell(&gs.name, ALL_LEVELS).unwrap();
        let se = (want * (1.0 - want) / cell.n as f64).sqrt();
        assert!((cell.ppv.unwrap() - want).abs() <= 3.0 * se, "group {g}");
        let observed_pos = gs.proportion * (gs.prevalence * (1.0 - gs.flip.pos_to_neg) + (1.0 - gs.prevalence) * gs.flip.neg_to_pos);
        overall_num += want * observed_pos;
        overall_den += observed_pos;
    }
    assert!((overall_num / overall_den - 0.641).abs() < 5e-4);
}

#[test]
fn empty_cells_are_absent() {
    let a = Attribute::with_levels("a", vec!["x".into(), "x".into()], vec!["x".into(), "y".into()]).unwrap();
    let b = Attribute::new("b", vec!["u".into(), "u".into()]);
    let t = labeller_ppv(&[true, false], &[true, false], &a, &b, &BootstrapConfig::default()).unwrap();
    let c = t.cell("y", "u").unwrap();
    assert_eq!((c.ppv, c.ci, c.n), (None, None, 0));
    assert!(Attribute::with_levels("a", vec!["z".into()], vec!["x".into()]).is_err());
}

fn scored(spec: &BiasSpec, n: usize, seed: u64) -> (groupfair::data::Dataset, Vec<usize>, Vec<f64>) {
    let d = spec.generate(n, seed).unwrap();
    let idx: Vec<usize> = (0..d.len()).collect();
    let scores = d.samples().iter().map(|s| spec.observed_posterior(s.group, &s.features)).collect();
    (d, idx, scores)
}

#[test]
fn proxy_equal_to_label_reproduces_standard_evaluation() {
    let spec = BiasSpec::preset("mimic-age-labelbias").unwrap();
    let (d, idx, scores) = scored(&spec, 4_000, 3);
    let mut with_proxy = d.samples().to_vec();
    for s in &mut with_proxy {
        s.proxies.insert("same".into(), s.label);
    }
    let d2 = groupfair::data::Dataset::new(with_proxy, d.group_vocab().to_vec()).unwrap();
    let cfg = BootstrapConfig { iters: 50, seed: 1, ..Default::default() };
    let params = MetricParams::default();
    let r = proxy_evaluate(&d2, &idx, vec![scores.clone()], "same", &params, &cfg).unwrap();

    let set = ScoredSet::new(scores, d.samples().iter().map(|s| s.label).collect(), d.samples().iter().map(|s| s.group).collect(), 4).unwrap();
    let ens = Ensemble::new(vec![set]).unwrap();
    for (g, name) in d.group_vocab().iter().enumerate() {
        for m in [Metric::Auroc, Metric::Bce, Metric::Ece] {
            let direct = groupfair::metrics::bootstrap(|s| m.evaluate(s, Subset::Group(g), &params), &ens, &cfg).unwrap();
            let v = r.get(m, name).unwrap();
            assert_eq!((v.point, v.ci_low, v.ci_high), (direct.point, Some(direct.ci_low), Some(direct.ci_high)));
        }
    }
    assert_eq!(r.curves.len(), 4);
}

#[test]
fn independent_proxy_has_chance_auroc() {
    let spec = BiasSpec::preset("two-group-gap").unwrap();
    let (d, idx, scores) = scored(&spec, 10_000, 4);
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut samples = d.samples().to_vec();
    for s in &mut samples {
        s.proxies.insert("coin".into(), r.random::<bool>());
    }
    let d = groupfair::data::Dataset::new(samples, d.group_vocab().to_vec()).unwrap();
    let cfg = BootstrapConfig { iters: 200, seed: 3, ..Default::default() };
    let rep = proxy_evaluate(&d, &idx, vec![scores], "coin", &MetricParams::default(), &cfg).unwrap();
    for g in d.group_vocab() {
        let v = rep.get(Metric::Auroc, g).unwrap();
        assert!(v.ci_low.unwrap() <= 0.5 && 0.5 <= v.ci_high.unwrap(), "{g}: {v:?}");
    }
}

#[test]
fn gold_proxy_exposes_labeller_false_positives() {
    // Scores calibrated to the noisy observed label are over-confident
    // against the gold label in groups with false positives.
    let spec = BiasSpec::preset("mimic-age-labelbias").unwrap();
    let (d, idx, scores) = scored(&spec, 20_000, 6);
    let gold = ProxySpec::from_toml("[[proxies]]\nname = \"gold\"\n").unwrap();
    let d = attach_proxies(&d, &gold, 1).unwrap();
    let cfg = BootstrapConfig { iters: 50, seed: 3, ..Default::default() };
    let rep = proxy_evaluate(&d, &idx, vec![scores.clone()], "gold", &MetricParams::default(), &cfg).unwrap();
    for (g, gs) in spec.groups.iter().enumerate() {
        let curve = &rep.curves[g];
        let mean_score: f64 = (0..curve.n_bins())
            .filter_map(|b| curve.mean_score[b].map(|m| m * curve.counts[b] as f64))
            .sum::<f64>()
            / curve.total() as f64;
        let gold_rate: f64 = (0..curve.n_bins())
            .filter_map(|b| curve.positive_rate[b].map(|p| p * curve.counts[b] as f64))
            .sum::<f64>()
            / curve.total() as f64;
        // closed form: E[S] ≈ observed prevalence, gold rate = prevalence
        let expected_gap = (1.0 - gs.prevalence) * gs.flip.neg_to_pos;
        assert!((mean_score - gold_rate - expected_gap).abs() < 0.03, "group {g}");
        assert!(rep.get(Metric::Ece, &gs.name).unwrap().point > 0.1, "group {g}");
    }
    assert!(proxy_evaluate(&d, &idx, vec![scores], "missing", &MetricParams::default(), &cfg).is_err());
}
