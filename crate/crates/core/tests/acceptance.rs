//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion, nonzero exit on
//! any failure. Run with `cargo test --test acceptance`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;

use doss::doss::{doss_select, doss_weight, DossParams};
use doss::manifest::{index_domains, DomainKey, DomainSizes, Label, SampleRecord};
use doss::metrics::{cde, eer, ScoreEntry, ScoreSet};
use doss::sampler::{sample_stream, SampleStreamSpec};
use doss::scaling::{build_scaling_config, fit_power_law, Axis, ScalingConfig};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

fn traced_pool() -> DomainSizes {
    DomainSizes::from_counts([
        (DomainKey::fake("r1", "f1"), 5000),
        (DomainKey::fake("r1", "f2"), 1000),
        (DomainKey::real("r1"), 10_000),
    ])
}

fn select_oracle() -> Outcome {
    let plan = doss_select(&traced_pool(), &DossParams::new(2500, 0.25, 1.0).unwrap())
        .map_err(|e| e.to_string())?;
    let got: Vec<u64> = [
        DomainKey::fake("r1", "f1"),
        DomainKey::fake("r1", "f2"),
        DomainKey::real("r1"),
    ]
    .iter()
    .map(|k| plan.counts[k])
    .collect();
    ensure(got == [2500, 1000, 875] && plan.counts.len() == 3, || {
        format!("plan {got:?}")
    })?;
    Ok(format!("f1={} f2={} r1={}", got[0], got[1], got[2]))
}

/// Up to `max_fake` fake and `max_real` real domains. Every real source gets
/// at least one fake; sizes span five decades.
fn random_pool(rng: &mut ChaCha8Rng, max_fake: usize, max_real: usize) -> DomainSizes {
    let reals = rng.gen_range(1..=max_real);
    let fakes = rng.gen_range(1..=max_fake);
    let mut counts = Vec::new();
    for r in 0..reals {
        counts.push((
            DomainKey::real(format!("src{r}")),
            10f64.powf(rng.gen_range(0.0..5.0)).ceil() as u64,
        ));
    }
    for f in 0..fakes {
        let src = format!(
            "src{}",
            if f < reals {
                f
            } else {
                rng.gen_range(0..reals)
            }
        );
        counts.push((
            DomainKey::fake(src, format!("gen{f}")),
            10f64.powf(rng.gen_range(0.0..5.0)).ceil() as u64,
        ));
    }
    DomainSizes::from_counts(counts)
}

fn weight_ratio_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let sizes = random_pool(&mut rng, 350, 20);
        let params = DossParams::new(
            rng.gen_range(1..100_000),
            rng.gen_range(0.01..4.0),
            rng.gen_range(0.1..50.0),
        )
        .unwrap();
        let plan = doss_weight(&sizes, &params).map_err(|e| e.to_string())?;
        worst = worst.max(rel(plan.real_mass(), params.rho * plan.fake_mass()));
    }
    ensure(worst <= 1e-9, || {
        format!("worst relative ratio error {worst:e}")
    })?;

    let plan = doss_weight(&traced_pool(), &DossParams::new(2500, 0.25, 5.0).unwrap())
        .map_err(|e| e.to_string())?;
    let round5 = |x: f64| (x * 1e5).round() / 1e5;
    let traced = [
        (DomainKey::fake("r1", "f1"), 4.78176),
        (DomainKey::fake("r1", "f2"), 3.98107),
        (DomainKey::real("r1"), 2.19071),
    ];
    for (k, want) in &traced {
        let got = plan.weights[k];
        ensure(round5(got) == *want, || {
            format!("tau=5 weight {k} = {got:.7}, hand trace {want}")
        })?;
    }
    let ratio = plan.real_mass() / plan.fake_mass();
    ensure((ratio - 0.25).abs() < 1e-12, || {
        format!("tau=5 ratio {ratio}")
    })?;
    Ok(format!(
        "1000 pools, worst relative error {worst:.2e}; tau=5 weights 4.78176/3.98107/2.19071"
    ))
}

fn naive_limit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let pools = 200;
    for _ in 0..pools {
        let sizes = random_pool(&mut rng, 350, 20);
        // the limit also needs every real domain to cover rho * its fake mass
        let mut per_real: BTreeMap<DomainKey, u64> = BTreeMap::new();
        for (k, n) in sizes.fakes() {
            *per_real.entry(k.base()).or_default() += n;
        }
        let rho = 0.25;
        let counts = sizes.iter().map(|(k, n)| {
            if k.is_real() {
                (
                    k.clone(),
                    n.max((per_real.get(k).copied().unwrap_or(0) as f64 * rho).ceil() as u64),
                )
            } else {
                (k.clone(), n)
            }
        });
        let sizes = DomainSizes::from_counts(counts.collect::<Vec<_>>());
        let max_fake = sizes.fakes().map(|(_, n)| n).max().unwrap();
        let n_cap = max_fake + rng.gen_range(0..1_000_000);
        let plan = doss_weight(&sizes, &DossParams::new(n_cap, rho, 1.0).unwrap())
            .map_err(|e| e.to_string())?;
        let fake_total: f64 = sizes.fakes().map(|(_, n)| n as f64).sum();
        for (k, n) in sizes.fakes() {
            worst = worst.max(rel(
                plan.weights[k] / plan.fake_mass(),
                n as f64 / fake_total,
            ));
        }
    }
    ensure(worst < 1e-12, || {
        format!("max relative deviation {worst:e}")
    })?;
    Ok(format!("{pools} pools, max relative deviation {worst:.2e}"))
}

fn sampler_convergence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut records = Vec::new();
    let mut push = |key: &DomainKey, n: u64| {
        for i in 0..n {
            records.push(SampleRecord {
                id: format!("{key}#{i}"),
                label: key.label(),
                source: key.source().to_string(),
                generator: key.generator().map(str::to_string),
                dataset: "synthetic".into(),
                duration_s: 4.0,
                path: format!("/pool/{i}.wav"),
            });
        }
    };
    for r in 0..18 {
        push(
            &DomainKey::real(format!("src{r}")),
            rng.gen_range(200..8000),
        );
    }
    for f in 0..330 {
        let n = 10f64.powf(rng.gen_range(1.0..3.7)).ceil() as u64;
        push(
            &DomainKey::fake(format!("src{}", f % 18), format!("gen{f}")),
            n,
        );
    }
    let index = index_domains(&records).map_err(|e| e.to_string())?;
    ensure(index.len() == 348, || format!("{} domains", index.len()))?;
    let plan = doss_weight(index.sizes(), &DossParams::new(2500, 0.25, 2.0).unwrap())
        .map_err(|e| e.to_string())?;
    let total: f64 = plan.weights.values().sum();
    let expected: Vec<f64> = plan.weights.values().map(|w| w / total).collect();

    let n = 1_000_000u64;
    let spec = SampleStreamSpec::new(plan, 20_240_601, n).map_err(|e| e.to_string())?;
    let mut stream = sample_stream(&spec, &index).map_err(|e| e.to_string())?;
    let mut hits = vec![0u64; stream.domain_count()];
    while let Some((d, _)) = stream.next_draw() {
        hits[d] += 1;
    }
    let real_draws: u64 = hits
        .iter()
        .enumerate()
        .filter(|(d, _)| stream.domain(*d).is_real())
        .map(|(_, h)| h)
        .sum();
    let tv = hits
        .iter()
        .zip(&expected)
        .map(|(&h, p)| (h as f64 / n as f64 - p).abs())
        .sum::<f64>()
        / 2.0;
    let real_frac = real_draws as f64 / n as f64;
    ensure(tv <= 0.01, || format!("TV {tv}"))?;
    ensure((real_frac - 0.2).abs() <= 0.002, || {
        format!("real fraction {real_frac}")
    })?;
    Ok(format!(
        "348 domains, 1e6 draws, TV {tv:.5}, real fraction {real_frac:.5}"
    ))
}

/// Independent EER: direct counts at midpoints between distinct scores, then
/// the minimum over DET segments of max(FNR, FPR) along the segment.
fn brute_force_eer(entries: &[ScoreEntry]) -> f64 {
    let mut scores: Vec<f64> = entries.iter().map(|e| e.score).collect();
    scores.sort_by(f64::total_cmp);
    scores.dedup();
    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(scores.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    thresholds.push(f64::INFINITY);
    let reals = entries.iter().filter(|e| e.label == Label::Real).count() as f64;
    let fakes = entries.len() as f64 - reals;
    let curve: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let fnr = entries
                .iter()
                .filter(|e| e.label == Label::Real && e.score < t)
                .count() as f64
                / reals;
            let fpr = entries
                .iter()
                .filter(|e| e.label == Label::Fake && e.score >= t)
                .count() as f64
                / fakes;
            (fnr, fpr)
        })
        .collect();
    let mut best = f64::INFINITY;
    for w in curve.windows(2) {
        let ((a0, b0), (a1, b1)) = (w[0], w[1]);
        let (d0, d1) = (a0 - b0, a1 - b1);
        let v = if d0 < 0.0 && d1 > 0.0 {
            let lambda = -d0 / (d1 - d0);
            a0 + lambda * (a1 - a0)
        } else {
            a0.max(b0).min(a1.max(b1))
        };
        best = best.min(v);
    }
    best
}

fn random_set(rng: &mut ChaCha8Rng, name: &str) -> ScoreSet {
    let len = rng.gen_range(10..=500);
    // a coarse grid makes ties common; gaps of 1/levels survive every transform below
    let levels = [20u32, 1000, 1_000_000][rng.gen_range(0..3)];
    let p_real = rng.gen_range(0.1..0.9);
    let shift = rng.gen_range(-0.3..0.3);
    let mut entries: Vec<ScoreEntry> = (0..len)
        .map(|_| {
            let real = rng.gen_bool(p_real);
            let raw: f64 = rng.gen_range(0.0..1.0) + if real { shift } else { 0.0 };
            ScoreEntry {
                score: (raw.clamp(0.0, 1.0) * levels as f64).round() / levels as f64,
                label: if real { Label::Real } else { Label::Fake },
            }
        })
        .collect();
    entries[0].label = Label::Real;
    entries[1].label = Label::Fake;
    ScoreSet::new(name, entries).unwrap()
}

fn monotone(rng: &mut ChaCha8Rng) -> Box<dyn Fn(f64) -> f64> {
    match rng.gen_range(0..5) {
        0 => {
            let (a, b) = (rng.gen_range(0.5..20.0), rng.gen_range(-10.0..10.0));
            Box::new(move |s| a * s + b)
        }
        1 => {
            let k = rng.gen_range(0.1..5.0);
            Box::new(move |s| (k * s).exp())
        }
        2 => {
            let c = rng.gen_range(-1.0..1.0);
            Box::new(move |s| (s + 1.0).powi(3) + c)
        }
        3 => {
            let k = rng.gen_range(0.5..4.0);
            Box::new(move |s| 1.0 / (1.0 + (-(s - 0.5) * k).exp()))
        }
        _ => {
            let knee = rng.gen_range(0.1..0.9);
            let slope = rng.gen_range(2.0..10.0);
            Box::new(move |s| {
                if s < knee {
                    s
                } else {
                    knee + slope * (s - knee)
                }
            })
        }
    }
}

fn eer_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let sets: Vec<ScoreSet> = (0..500)
        .map(|i| random_set(&mut rng, &format!("s{i}")))
        .collect();
    for set in &sets {
        let got = eer(set).map_err(|e| e.to_string())?;
        worst = worst.max((got - brute_force_eer(&set.entries)).abs());
    }
    ensure(worst <= 1e-12, || format!("max |EER - oracle| = {worst:e}"))?;

    let mut drift = 0.0f64;
    for _ in 0..100 {
        let f = monotone(&mut rng);
        for set in sets.iter().take(50) {
            let moved: Vec<ScoreEntry> = set
                .entries
                .iter()
                .map(|e| ScoreEntry {
                    score: f(e.score),
                    label: e.label,
                })
                .collect();
            let moved = ScoreSet::new("t", moved).unwrap();
            drift = drift.max((eer(&moved).unwrap() - eer(set).unwrap()).abs());
        }
    }
    ensure(drift <= 1e-12, || {
        format!("EER moved by {drift:e} under a monotone transform")
    })?;
    Ok(format!(
        "500 sets, max oracle gap {worst:.1e}; 100 transforms x 50 sets, max drift {drift:.1e}"
    ))
}

fn cde_grid() -> Outcome {
    let mut checked = 0;
    for i in 0..=200 {
        for j in 0..=200 {
            let (e, miss) = (i as f64 / 200.0, j as f64 / 200.0);
            let got = cde(e, 1.0 - miss);
            // harmonic mean written as the reciprocal of mean reciprocals
            let oracle = if e == 0.0 || miss == 0.0 {
                0.0
            } else {
                2.0 / (1.0 / e + 1.0 / (1.0 - (1.0 - miss)))
            };
            ensure((got - oracle).abs() <= 1e-12, || {
                format!("cde({e}, {miss}) = {got}, expected {oracle}")
            })?;
            ensure(got <= 2.0 * e.min(1.0 - (1.0 - miss)) + 1e-15, || {
                format!("cde({e}, {miss}) above 2*min")
            })?;
            checked += 1;
        }
    }
    ensure(cde(0.0, 1.0) == 0.0, || "0/0 case".into())?;
    Ok(format!("{checked} grid points, 0/0 -> 0"))
}

fn scaling_construction() -> Outcome {
    // 8 sources x 4 generators, 10k each
    let mut counts = Vec::new();
    for s in 0..8 {
        counts.push((DomainKey::real(format!("S{s}")), 10_000));
        for g in 0..4 {
            counts.push((DomainKey::fake(format!("S{s}"), format!("G{g}")), 10_000));
        }
    }
    let source_pool = DomainSizes::from_counts(counts);
    // 16 generators over VCTK and LibriTTS, 20k per (generator, corpus)
    let mut counts = vec![
        (DomainKey::real("VCTK"), 80_000),
        (DomainKey::real("LibriTTS"), 80_000),
    ];
    for g in 0..16 {
        for src in ["VCTK", "LibriTTS"] {
            counts.push((DomainKey::fake(src, format!("G{g}")), 20_000));
        }
    }
    let generator_pool = DomainSizes::from_counts(counts);

    let trials = build_scaling_config(&ScalingConfig::new(Axis::Source, 8, 0.125), &source_pool)
        .map_err(|e| e.to_string())?;
    let plan = &trials[0].plan;
    let frac = plan.real_total() as f64 / plan.total() as f64;
    ensure(plan.total() == 50_000 && frac == 0.2, || {
        format!(
            "(source, 8, 0.125): {} samples, real fraction {frac}",
            plan.total()
        )
    })?;

    let mut points = 0;
    for (axis, pool) in [
        (Axis::Source, &source_pool),
        (Axis::Generator, &generator_pool),
    ] {
        for (n, v) in axis.grid_points() {
            let mut cfg = ScalingConfig::new(axis, n, v);
            cfg.trial_seed = 100;
            let trials =
                build_scaling_config(&cfg, pool).map_err(|e| format!("({axis}, {n}, {v}): {e}"))?;
            for t in &trials {
                ensure(t.plan.real_total() * 4 == t.plan.fake_total(), || {
                    format!(
                        "({axis}, {n}, {v}) trial {}: {} real vs {} fake",
                        t.trial,
                        t.plan.real_total(),
                        t.plan.fake_total()
                    )
                })?;
                let per_unit = match axis {
                    Axis::Source => 50_000.0 / 8.0 / 0.125,
                    Axis::Generator => 50_000.0,
                };
                let expected = per_unit * n as f64 * v;
                ensure(t.plan.total() as f64 == expected, || {
                    format!(
                        "({axis}, {n}, {v}): {} samples, expected {expected}",
                        t.plan.total()
                    )
                })?;
            }
            points += 1;
        }
    }
    ensure(points == 25, || format!("{points} grid points"))?;
    Ok(format!(
        "50000 samples at real fraction 0.2; {points} grid points ratio-exact"
    ))
}

fn power_law_recovery() -> Outcome {
    let xs: Vec<f64> = (1..=16).map(f64::from).collect();
    let clean: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 3.0 * x.powf(-0.5))).collect();
    let fit = fit_power_law(&clean).map_err(|e| e.to_string())?;
    ensure(
        (fit.a - 3.0).abs() <= 1e-9 && (fit.b + 0.5).abs() <= 1e-9,
        || format!("noiseless fit {fit}"),
    )?;
    ensure((fit.r_squared - 1.0).abs() <= 1e-12, || {
        format!("noiseless R² {}", fit.r_squared)
    })?;

    // log-normal noise: ln y = ln 3 - 0.5 ln x + e, e ~ N(0, 0.1)
    let noise: Normal<f64> = Normal::new(0.0, 0.1).unwrap();
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let n = lx.len() as f64;
    let mean_lx = lx.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mean_lx).powi(2)).sum();
    let trials = 100;
    let (mut bs, mut las) = (Vec::new(), Vec::new());
    let mut covered = 0;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + seed);
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .map(|&x| (x, 3.0 * x.powf(-0.5) * noise.sample(&mut rng).exp()))
            .collect();
        let f = fit_power_law(&pts).map_err(|e| e.to_string())?;
        // per-trial OLS standard errors from the residual variance
        let s2 = pts
            .iter()
            .map(|&(x, y)| (y.ln() - f.a.ln() - f.b * x.ln()).powi(2))
            .sum::<f64>()
            / (n - 2.0);
        let se_b = (s2 / sxx).sqrt();
        let se_la = (s2 * (1.0 / n + mean_lx * mean_lx / sxx)).sqrt();
        if (f.b + 0.5).abs() <= 3.0 * se_b && (f.a.ln() - 3f64.ln()).abs() <= 3.0 * se_la {
            covered += 1;
        }
        bs.push(f.b);
        las.push(f.a.ln());
    }
    let summary = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt();
        (m, sd / (v.len() as f64).sqrt())
    };
    let (mb, seb) = summary(&bs);
    let (mla, sela) = summary(&las);
    ensure((mb + 0.5).abs() <= 3.0 * seb, || {
        format!("mean b {mb} vs -0.5 (se {seb})")
    })?;
    ensure((mla - 3f64.ln()).abs() <= 3.0 * sela, || {
        format!("mean ln a {mla} vs ln 3 (se {sela})")
    })?;
    Ok(format!(
        "noiseless exact; {trials} noisy trials: mean b {mb:.4} (±{:.4}), mean a {:.4}; {covered}/{trials} trials inside their own 3-SE box",
        3.0 * seb,
        mla.exp()
    ))
}

fn doss_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_doss"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "doss {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn write_synthetic_manifest(path: &Path, records: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut out = String::with_capacity(records * 140);
    for i in 0..records {
        let src = rng.gen_range(0..6);
        let line = if rng.gen_bool(0.3) {
            format!(
                r#"{{"id":"r{i:06}","label":"real","source":"src{src}","dataset":"corpus{src}","duration_s":{:.2},"path":"/a/r{i}.wav"}}"#,
                rng.gen_range(1.0..9.0)
            )
        } else {
            // skewed generator popularity
            let gen = (rng.gen_range(0.0f64..1.0).powi(3) * 40.0) as u32;
            format!(
                r#"{{"id":"f{i:06}","label":"fake","source":"src{src}","generator":"gen{gen}","dataset":"corpus{src}","duration_s":{:.2},"path":"/a/f{i}.wav"}}"#,
                rng.gen_range(1.0..9.0)
            )
        };
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| e.to_string())
}

fn pipeline(dir: &Path) -> Result<BTreeMap<&'static str, Vec<u8>>, String> {
    doss_cli(
        dir,
        &[
            "plan",
            "--manifest",
            "pool.jsonl",
            "--mode",
            "select",
            "--n-cap",
            "1500",
            "--rho",
            "0.25",
            "--out",
            "select.json",
        ],
    )?;
    doss_cli(
        dir,
        &[
            "materialize",
            "--manifest",
            "pool.jsonl",
            "--plan",
            "select.json",
            "--seed",
            "17",
            "--out",
            "pruned.jsonl",
        ],
    )?;
    doss_cli(
        dir,
        &[
            "plan",
            "--manifest",
            "pool.jsonl",
            "--mode",
            "weight",
            "--n-cap",
            "1500",
            "--rho",
            "0.25",
            "--tau",
            "3",
            "--out",
            "weight.json",
        ],
    )?;
    doss_cli(
        dir,
        &[
            "sample",
            "--manifest",
            "pool.jsonl",
            "--plan",
            "weight.json",
            "--seed",
            "17",
            "--length",
            "100000",
            "--out",
            "stream.txt",
        ],
    )?;
    doss_cli(
        dir,
        &[
            "distribution",
            "--manifest",
            "pool.jsonl",
            "--plan",
            "weight.json",
            "--out",
            "dist.csv",
        ],
    )?;

    let mut payloads = BTreeMap::new();
    for (name, json) in [
        ("select.json", true),
        ("pruned.jsonl", false),
        ("weight.json", true),
        ("stream.txt", false),
        ("dist.csv", false),
    ] {
        let bytes = std::fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let payload = if json {
            let mut v: Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
            v.as_object_mut().unwrap().remove("provenance");
            serde_json::to_vec(&v).unwrap()
        } else {
            bytes
        };
        payloads.insert(name, payload);
    }
    Ok(payloads)
}

fn end_to_end_determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    for d in [&a, &b] {
        std::fs::create_dir(d).map_err(|e| e.to_string())?;
        write_synthetic_manifest(&d.join("pool.jsonl"), 100_000)?;
    }
    let first = pipeline(&a)?;
    let second = pipeline(&b)?;
    for (name, bytes) in &first {
        ensure(!bytes.is_empty(), || format!("{name} is empty"))?;
        ensure(second[name] == *bytes, || {
            format!("{name} differs between runs")
        })?;
    }
    let stream_len = first["stream.txt"].iter().filter(|&&c| c == b'\n').count();
    ensure(stream_len == 100_000, || {
        format!("stream has {stream_len} ids")
    })?;
    Ok(format!(
        "100k records, {} artifacts byte-identical",
        first.len()
    ))
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "select oracle",
            limit: Some(Duration::from_secs(1)),
            run: select_oracle,
        },
        Criterion {
            id: 2,
            name: "weight ratio law",
            limit: Some(Duration::from_secs(10)),
            run: weight_ratio_law,
        },
        Criterion {
            id: 3,
            name: "naive-pooling limit",
            limit: None,
            run: naive_limit,
        },
        Criterion {
            id: 4,
            name: "sampler convergence",
            limit: Some(Duration::from_secs(30)),
            run: sampler_convergence,
        },
        Criterion {
            id: 5,
            name: "EER oracle equivalence",
            limit: None,
            run: eer_oracle,
        },
        Criterion {
            id: 6,
            name: "CDE grid",
            limit: None,
            run: cde_grid,
        },
        Criterion {
            id: 7,
            name: "scaling construction",
            limit: None,
            run: scaling_construction,
        },
        Criterion {
            id: 8,
            name: "power-law recovery",
            limit: None,
            run: power_law_recovery,
        },
        Criterion {
            id: 9,
            name: "end-to-end determinism",
            limit: Some(Duration::from_secs(60)),
            run: end_to_end_determinism,
        },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let mut outcome = (c.run)();
        let elapsed = start.elapsed();
        if let (Ok(detail), Some(limit)) = (&outcome, c.limit) {
            if elapsed > limit {
                outcome = Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"));
            }
        }
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {}. {} ({elapsed:.2?}): {detail}", c.id, c.name);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
