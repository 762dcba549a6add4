use std::collections::BTreeMap;

use proptest::prelude::*;

use doss::doss::{doss_select, doss_weight, DossParams};
use doss::manifest::{
    canonicalize_sources, index_domains, parse_manifest, write_manifest, CanonicalSourceMap,
    DomainKey, DomainSizes, Label, SampleRecord,
};
use doss::metrics::{cde, eer, ScoreEntry, ScoreSet};
use doss::sampler::{builtin_drawers, sample_stream_with, SampleStreamSpec};
use doss::scaling::fit_power_law;

/// Sources with a real domain each and 1..8 generators per source.
fn pool() -> impl Strategy<Value = DomainSizes> {
    prop::collection::vec(
        (1u64..20_000, prop::collection::vec(1u64..50_000, 1..8)),
        1..5,
    )
    .prop_map(|sources| {
        let mut counts = Vec::new();
        for (s, (real, fakes)) in sources.into_iter().enumerate() {
            counts.push((DomainKey::real(format!("s{s}")), real));
            for (g, n) in fakes.into_iter().enumerate() {
                counts.push((DomainKey::fake(format!("s{s}"), format!("g{g}")), n));
            }
        }
        DomainSizes::from_counts(counts)
    })
}

fn records() -> impl Strategy<Value = Vec<SampleRecord>> {
    prop::collection::vec((any::<bool>(), 0usize..3, 0usize..3, 0.1f64..30.0), 1..60).prop_map(
        |rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (real, s, g, dur))| SampleRecord {
                    id: format!("id{i}"),
                    label: if real { Label::Real } else { Label::Fake },
                    source: ["VCTK", "LibriTTS", "a/b%"][s].to_string(),
                    generator: (!real).then(|| ["HifiGAN", "WaveGlow", "x/y"][g].to_string()),
                    dataset: ["VCTK", "ASVspoof", "MLAAD"][g].to_string(),
                    duration_s: dur,
                    path: format!("/data/{i}.wav"),
                })
                .collect()
        },
    )
}

fn score_set() -> impl Strategy<Value = ScoreSet> {
    // coarse scores so ties are frequent
    prop::collection::vec((0u32..40, any::<bool>()), 2..200)
        .prop_filter("both classes", |v| {
            v.iter().any(|e| e.1) && v.iter().any(|e| !e.1)
        })
        .prop_map(|v| {
            let entries = v
                .into_iter()
                .map(|(s, real)| ScoreEntry {
                    score: s as f64 / 40.0,
                    label: if real { Label::Real } else { Label::Fake },
                })
                .collect();
            ScoreSet::new("p", entries).unwrap()
        })
}

proptest! {
    #[test]
    fn index_ignores_record_order(recs in records(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = recs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = index_domains(&recs).unwrap();
        let b = index_domains(&shuffled).unwrap();
        prop_assert_eq!(a.pool_id(), b.pool_id());
        prop_assert_eq!(a.sizes(), b.sizes());
        prop_assert_eq!(a.sizes().total(), recs.len() as u64);
    }

    #[test]
    fn manifest_round_trips(recs in records()) {
        let mut buf = Vec::new();
        write_manifest(&mut buf, &recs).unwrap();
        prop_assert_eq!(parse_manifest(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn canonicalization_is_idempotent(recs in records()) {
        let map = CanonicalSourceMap::new([
            (("ASVspoof".to_string(), "VCTK".to_string()), "vctk".to_string()),
            (("MLAAD".to_string(), "VCTK".to_string()), "vctk".to_string()),
            (("VCTK".to_string(), "VCTK".to_string()), "vctk".to_string()),
            (("VCTK".to_string(), "LibriTTS".to_string()), "libri".to_string()),
        ])
        .unwrap();
        let (once, _) = canonicalize_sources(&recs, &map);
        let (twice, report) = canonicalize_sources(&once, &map);
        prop_assert_eq!(&twice, &once);
        prop_assert_eq!(report.total_removed(), 0);
    }

    #[test]
    fn select_obeys_caps_and_ratio(sizes in pool(), n_cap in 1u64..60_000, rho in 0.01f64..2.0) {
        let plan = doss_select(&sizes, &DossParams::new(n_cap, rho, 1.0).unwrap()).unwrap();
        let mut per_real: BTreeMap<DomainKey, u64> = BTreeMap::new();
        for (k, n) in sizes.fakes() {
            prop_assert_eq!(plan.counts[k], n.min(n_cap));
            *per_real.entry(k.base()).or_default() += plan.counts[k];
        }
        for (k, n) in sizes.reals() {
            let s = plan.counts[k];
            prop_assert!(s <= n);
            prop_assert!(s as f64 <= per_real[k] as f64 * rho * (1.0 + 1e-9));
            // floor, not round: one more sample would overshoot whenever the pool allows it
            if s < n {
                prop_assert!((s + 1) as f64 > per_real[k] as f64 * rho * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn select_is_monotone_in_cap(sizes in pool(), a in 1u64..60_000, b in 1u64..60_000, rho in 0.01f64..2.0) {
        let (lo, hi) = (a.min(b), a.max(b));
        let small = doss_select(&sizes, &DossParams::new(lo, rho, 1.0).unwrap()).unwrap();
        let large = doss_select(&sizes, &DossParams::new(hi, rho, 1.0).unwrap()).unwrap();
        for (k, &n) in &small.counts {
            prop_assert!(n <= large.counts[k], "{} shrank from {} to {}", k, n, large.counts[k]);
        }
    }

    #[test]
    fn weight_ratio_law(sizes in pool(), n_cap in 1u64..60_000, rho in 0.01f64..4.0, tau in 0.2f64..50.0) {
        let plan = doss_weight(&sizes, &DossParams::new(n_cap, rho, tau).unwrap()).unwrap();
        let target = rho * plan.fake_mass();
        prop_assert!((plan.real_mass() - target).abs() <= 1e-9 * target);
        prop_assert!(plan.weights.values().all(|w| w.is_finite() && *w >= 0.0));
    }

    #[test]
    fn higher_temperature_flattens_fakes(sizes in pool(), n_cap in 1u64..60_000, t1 in 0.2f64..20.0, t2 in 0.2f64..20.0) {
        let spread = |tau: f64| {
            let plan = doss_weight(&sizes, &DossParams::new(n_cap, 0.25, tau).unwrap()).unwrap();
            let fakes: Vec<f64> = plan.weights.iter().filter(|(k, _)| k.is_fake()).map(|(_, &w)| w).collect();
            let max = fakes.iter().cloned().fold(f64::MIN, f64::max);
            let min = fakes.iter().cloned().fold(f64::MAX, f64::min);
            max / min
        };
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        prop_assert!(spread(hi) <= spread(lo) * (1.0 + 1e-12));
    }

    #[test]
    fn large_cap_recovers_naive_pooling(sizes in pool()) {
        let max_fake = sizes.fakes().map(|(_, n)| n).max().unwrap();
        let plan = doss_weight(&sizes, &DossParams::new(max_fake, 0.25, 1.0).unwrap()).unwrap();
        let fake_total: f64 = sizes.fakes().map(|(_, n)| n as f64).sum();
        for (k, n) in sizes.fakes() {
            let expected = n as f64 / fake_total;
            let got = plan.weights[k] / plan.fake_mass();
            prop_assert!((got - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn eer_is_rank_based(set in score_set(), k in 0.1f64..10.0, c in -5.0f64..5.0) {
        let base = eer(&set).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        let transforms: [&dyn Fn(f64) -> f64; 3] = [&|s| k * s + c, &|s| (k * s).exp() + c, &|s| s.powi(3) + c];
        for f in transforms {
            let moved: Vec<ScoreEntry> = set
                .entries
                .iter()
                .map(|e| ScoreEntry { score: f(e.score), label: e.label })
                .collect();
            let moved = ScoreSet::new("t", moved).unwrap();
            prop_assert!((eer(&moved).unwrap() - base).abs() <= 1e-12);
        }
    }

    #[test]
    fn eer_label_swap_symmetry(set in score_set()) {
        // negating scores and swapping labels mirrors the DET curve
        let swapped = ScoreSet::new(
            "s",
            set.entries
                .iter()
                .map(|e| ScoreEntry {
                    score: -e.score,
                    label: if e.label == Label::Real { Label::Fake } else { Label::Real },
                })
                .collect(),
        )
        .unwrap();
        prop_assert!((eer(&swapped).unwrap() - eer(&set).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn cde_bounds(e in 0.0f64..=1.0, a in 0.0f64..=1.0) {
        let miss = 1.0 - a;
        let v = cde(e, a);
        prop_assert!(v >= 0.0);
        prop_assert!(v <= 2.0 * e.min(miss) + 1e-15);
        prop_assert!(v <= e.max(miss) + 1e-15);
        prop_assert!(v >= e.min(miss) - 1e-15);
        prop_assert!((cde(miss.max(0.0), 1.0 - e) - v).abs() <= 1e-15);
    }

    #[test]
    fn fit_is_scale_equivariant(
        pts in prop::collection::vec((0.1f64..100.0, 0.01f64..10.0), 3..20),
        cx in 0.1f64..10.0,
        cy in 0.1f64..10.0,
    ) {
        prop_assume!(pts.iter().any(|p| (p.0 - pts[0].0).abs() > 1e-3));
        let f = fit_power_law(&pts).unwrap();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (cx * x, cy * y)).collect();
        let g = fit_power_law(&scaled).unwrap();
        prop_assert!((g.b - f.b).abs() <= 1e-9 * (1.0 + f.b.abs()));
        let expected_a = f.a * cy * cx.powf(-f.b);
        prop_assert!((g.a - expected_a).abs() <= 1e-8 * expected_a);
        prop_assert!((g.r_squared - f.r_squared).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn streams_converge_to_plan(sizes in pool(), seed in any::<u64>(), alias in any::<bool>()) {
        // one synthetic id per domain is enough: only the domain frequencies matter here
        let records: Vec<SampleRecord> = sizes
            .iter()
            .map(|(k, _)| SampleRecord {
                id: k.to_string(),
                label: k.label(),
                source: k.source().to_string(),
                generator: k.generator().map(str::to_string),
                dataset: "d".into(),
                duration_s: 1.0,
                path: "p".into(),
            })
            .collect();
        let index = index_domains(&records).unwrap();
        let plan = doss_weight(&sizes, &DossParams::new(2500, 0.25, 2.0).unwrap()).unwrap();
        let total: f64 = plan.weights.values().sum();
        let expected: BTreeMap<String, f64> = plan.weights.iter().map(|(k, w)| (k.to_string(), w / total)).collect();
        let n = 200_000u64;
        let drawer = builtin_drawers().get(if alias { "alias" } else { "cumulative" }).unwrap();
        let spec = SampleStreamSpec::new(plan, seed, n).unwrap();
        let mut seen: BTreeMap<&str, u64> = BTreeMap::new();
        for id in sample_stream_with(&spec, &index, drawer.as_ref()).unwrap() {
            *seen.entry(id).or_default() += 1;
        }
        let tv: f64 = expected
            .iter()
            .map(|(k, p)| (seen.get(k.as_str()).copied().unwrap_or(0) as f64 / n as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        prop_assert!(tv <= 0.01, "tv {}", tv);
    }
}
