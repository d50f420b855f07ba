//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line with the measured values before asserting.

use std::time::{Duration, Instant};

use mason::adversary::AttackerKind;
use mason::classification::{classify, ClassifierConfig, Policy};
use mason::experiments::{
    build_world, roc_curve, roc_samples, run_trials, sweep_grid, trial_seed, trial_trace, write_csv, Mode,
    ScenarioConfig, Summary,
};
use mason::protocol::{run_round, AbortReason, DropReason, ProtocolConfig, RejectReason, TraceKind};
use mason::signalprint::{squared_distance, Signalprint, SignalprintThresholds};
use mason::verify::{
    GRID, adversarial_params, case_seed, compare_with_oracle, exact_config, growth_check, max_sybil_bound, synthetic_case,
    CaseParams, Candidates, Lies,
};
use mason::world::{Jamming, RevealBehavior, Truth};
use mason::{Exact, IdentityId, Thresholds};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, pass: bool, detail: impl AsRef<str>) {
    println!("criterion {criterion:>2} {}: {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    assert!(pass, "criterion {criterion} failed: {}", detail.as_ref());
}

#[test]
fn criterion_01_max_sybil_never_accepts_more_sybils_than_it_collapses() {
    let start = Instant::now();
    let (mut violations, mut with_collapse) = (0, 0);
    let cases = 1000;
    for k in 0..cases {
        let p = adversarial_params(k, 12, 101);
        assert!(p.identities() <= 12);
        let case = synthetic_case(&p, case_seed(101, k)).unwrap();
        let b = max_sybil_bound(&case, &Thresholds::default(), 4).unwrap();
        with_collapse += usize::from(b.collapsed > 0);
        violations += usize::from(!b.holds());
    }
    let elapsed = start.elapsed();
    report(
        1,
        violations == 0 && elapsed < Duration::from_secs(60),
        format!("{violations} violations in {cases} scenarios ({with_collapse} with collapses), {elapsed:.2?}"),
    );
}

#[test]
fn criterion_02_consistency_policy_matches_exhaustive_search() {
    let start = Instant::now();
    let cases = 200;
    let (mut all_bad, mut grown_bad, mut untruthful) = (0, 0, 0);
    let mut per_lns = [0usize; 3];
    for k in 0..cases {
        let p = adversarial_params(k, 10, 202);
        assert!(p.identities() <= 10 && p.lying_nonsybil <= 2);
        per_lns[p.lying_nonsybil] += 1;
        let case = synthetic_case(&p, case_seed(202, k)).unwrap();
        let cfg = exact_config::<Exact>(4, 3, case_seed(203, k));
        all_bad += usize::from(!compare_with_oracle(&case, &cfg, Candidates::All).unwrap().agrees());
        let grown = compare_with_oracle(&case, &cfg, Candidates::Grown).unwrap();
        if grown.truthful_candidate {
            grown_bad += usize::from(!grown.agrees());
        } else {
            untruthful += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        2,
        all_bad == 0 && grown_bad == 0 && elapsed < Duration::from_secs(300),
        format!(
            "{cases} scenarios (liars 0/1/2: {per_lns:?}); mismatches over all receiver sets {all_bad}, \
             over grown candidates {grown_bad} ({untruthful} grew no truthful set), {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_03_conforming_probability_matches_growth_frequency() {
    let runs = 10_000;
    let mut worst = (0.0, 0, 0);
    let mut points = 0;
    for (j, c) in (5..=30).step_by(5).enumerate() {
        for (i, lns) in (0..=10).step_by(2).enumerate() {
            let g = growth_check(c, lns, 4, runs, 303 + (j * 11 + i) as u64).unwrap();
            points += 1;
            if g.error() > worst.0 {
                worst = (g.error(), c, lns);
            }
        }
    }
    report(
        3,
        worst.0 <= 0.02,
        format!("{points} grid points x {runs} runs; largest gap {:.4} at C={}, LNS={}", worst.0, worst.1, worst.2),
    );
}

#[test]
fn criterion_04_distance_ignores_power_shifts_and_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let observers: Vec<IdentityId> = (0..4).map(IdentityId).collect();
    let mut failures = 0;
    let trials = 10_000;
    for _ in 0..trials {
        let dim = rng.random_range(2..=4);
        let obs = observers[..dim].to_vec();
        // Exact rationals at mixed report resolutions. Ratio<i64> overflows
        // once squared sums reach denominators near 1e9, so the
        // denominators stay small.
        let r = |rng: &mut ChaCha8Rng| {
            Exact::new(rng.random_range(-100_000..100_000), [1, 2, 3, 4, 5, 8, 10, 100][rng.random_range(0..8)])
        };
        let v: Vec<Exact> = (0..dim).map(|_| r(&mut rng)).collect();
        let w: Vec<Exact> = (0..dim).map(|_| r(&mut rng)).collect();
        let c = r(&mut rng);
        let a = Signalprint::complete(obs.clone(), v.clone()).unwrap();
        let shifted = Signalprint::complete(obs.clone(), v.iter().map(|x| *x + c).collect()).unwrap();
        let b = Signalprint::complete(obs.clone(), w).unwrap();
        let exact_ok = squared_distance(&a, &shifted).unwrap().is_zero()
            && squared_distance(&a, &b).unwrap() == squared_distance(&b, &a).unwrap();

        // Doubles on a dyadic grid, where v + c is representable.
        let g = |rng: &mut ChaCha8Rng| rng.random_range(-400..0) as f64 / 4.0;
        let v: Vec<f64> = (0..dim).map(|_| g(&mut rng)).collect();
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-100.0..0.0)).collect();
        let c = rng.random_range(-160..160) as f64 / 8.0;
        let a = Signalprint::complete(obs.clone(), v.clone()).unwrap();
        let shifted = Signalprint::complete(obs.clone(), v.iter().map(|x| x + c).collect()).unwrap();
        let b = Signalprint::complete(obs, w).unwrap();
        let float_ok = squared_distance(&a, &shifted).unwrap() == 0.0
            && squared_distance(&a, &b).unwrap() == squared_distance(&b, &a).unwrap();
        failures += usize::from(!(exact_ok && float_ok));
    }
    report(4, failures == 0, format!("{failures} failures in {trials} random (v, c) pairs, exact and f64"));
}

#[test]
fn criterion_05_dimension_four_operating_point() {
    let mut cfg = ScenarioConfig { name: "roc".into(), seed: 505, trials: 500, ..Default::default() };
    cfg.counts.conforming = 10;
    cfg.counts.attacker_nodes = 2;
    assert!(cfg.channel.measurement_std <= 1.5);
    let samples = roc_samples(&cfg).unwrap();
    let sybils = samples.iter().filter(|s| s.sybil).count();
    let points = roc_curve(&samples, &cfg.roc.thresholds);
    let best = points.iter().filter(|p| p.fpr <= 0.05).max_by(|a, b| a.tpr.total_cmp(&b.tpr)).copied();
    let ok = best.is_some_and(|p| p.tpr >= 0.999);
    let detail = match best {
        Some(p) => format!(
            "sigma_meas {} dB, {sybils} Sybil / {} non-Sybil samples; threshold {:.2}: TPR {:.4} at FPR {:.4}",
            cfg.channel.measurement_std,
            samples.len() - sybils,
            p.threshold,
            p.tpr,
            p.fpr
        ),
        None => "no threshold with FPR <= 0.05".into(),
    };
    report(5, ok, detail);
}

fn consistency_point(c: usize, lns: usize, trials: usize, seed: u64) -> Summary {
    let mut cfg = ScenarioConfig { mode: Mode::GuessModel, seed, trials, ..Default::default() };
    cfg.counts.conforming = c;
    cfg.counts.lying_nonsybil = lns;
    cfg.attacker.kind = AttackerKind::ConsistencyOptimal;
    cfg.attacker.sybils_per_node = 20;
    cfg.classifier.policy = Policy::Consistency;
    Summary::from_trials(&run_trials(&cfg).unwrap())
}

#[test]
fn criterion_06_consistency_policy_has_no_condition3_breaks() {
    let trials = 100_000;
    let mut parts = Vec::new();
    let mut breaks = 0;
    for (k, (c, lns)) in [(20, 11), (24, 14), (30, 17), (40, 24)].into_iter().enumerate() {
        assert!(c as f64 / (lns + 1) as f64 >= 1.6);
        let s = consistency_point(c, lns, trials, 606 + k as u64);
        breaks += s.condition3_breaks;
        parts.push(format!("C={c},LNS={lns}: {} breaks (95% upper {:.1e})", s.condition3_breaks, s.condition3_break_hi));
    }
    report(6, breaks == 0, format!("{trials} trials each, sigma_pred 7.3; {}", parts.join("; ")));
}

#[test]
fn criterion_07_max_sybil_ratio_band() {
    let trials = 10_000;
    let mut ratios = Vec::new();
    for c in 11..=30 {
        let mut best: f64 = 0.0;
        for g in [2, 3, 4, 5, 6, 8, 10] {
            let mut cfg = ScenarioConfig { mode: Mode::GuessModel, seed: 707 + c as u64, trials, ..Default::default() };
            cfg.counts.conforming = c;
            cfg.attacker.kind = AttackerKind::MaxSybilOptimal;
            cfg.attacker.sybils_per_node = 30;
            cfg.attacker.group_size = g;
            cfg.classifier.policy = Policy::MaxSybil;
            best = best.max(Summary::from_trials(&run_trials(&cfg).unwrap()).sybil_ratio_mean);
        }
        ratios.push((c as f64, best));
    }
    let in_band = ratios.iter().all(|(_, r)| (0.0..=0.3).contains(r));
    let n = ratios.len() as f64;
    let (mx, my) = (ratios.iter().map(|p| p.0).sum::<f64>() / n, ratios.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = ratios.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / ratios.iter().map(|(x, _)| (x - mx) * (x - mx)).sum::<f64>();
    let (first, last) = (ratios[0].1, ratios[ratios.len() - 1].1);
    report(
        7,
        in_band && slope < 0.0 && last < first,
        format!("best-group-size ratio {first:.4} at C=11 to {last:.4} at C=30, fitted slope {slope:.2e}, all in [0, 0.3]: {in_band}"),
    );
}

#[test]
fn criterion_08_protocol_aborts() {
    let protocol = ProtocolConfig::default();

    let mut cfg = ScenarioConfig::default();
    cfg.counts.conforming = 400;
    cfg.counts.attacker_nodes = 0;
    cfg.geometry.area = 60.0;
    let world = build_world(&cfg, 808).unwrap();
    let crowd = run_round(&world, &protocol, 1).unwrap();
    let crowd_ok = crowd.roster.len() == 401 && crowd.abort == Some(AbortReason::TooManyIdentities);

    let mut cfg = ScenarioConfig::default();
    cfg.jamming = Some(Jamming::Hello { victim: 3 });
    let jam = run_round(&build_world(&cfg, 809).unwrap(), &protocol, 2).unwrap();
    let jam_ok = jam.abort == Some(AbortReason::JammingSuspected) && jam.duration_ms == protocol.timeout_ms;

    let mut cfg = ScenarioConfig::default();
    cfg.counts.attacker_nodes = 0;
    cfg.counts.lying_nonsybil = 2;
    cfg.reveal = RevealBehavior::Mismatch;
    let world = build_world(&cfg, 810).unwrap();
    let bad = run_round(&world, &protocol, 3).unwrap();
    let liars: Vec<IdentityId> = world.ids().into_iter().filter(|i| world.truth(*i) == Some(Truth::LyingNonsybil)).collect();
    let rows_dropped = liars.iter().all(|l| bad.dropped.get(l) == Some(&DropReason::Mismatch))
        && bad.observations.as_ref().is_some_and(|o| liars.iter().all(|l| o.series(*l, IdentityId(0)).is_some_and(|s| s.iter().all(Option::is_none))));
    let completed = bad.abort.is_none() && bad.trace.count(TraceKind::Done) == 1;

    let again = run_round(&world, &protocol, 3).unwrap();
    let deterministic = again.trace == bad.trace && run_round(&build_world(&cfg, 810).unwrap(), &protocol, 3).unwrap().trace == bad.trace;

    report(
        8,
        crowd_ok && jam_ok && rows_dropped && completed && deterministic,
        format!(
            "roster {} -> {:?}; jammed HELLO-I -> {:?} at {} ms; mismatched reveals from {} liars dropped: {rows_dropped}, round completed: {completed}; repeatable: {deterministic}",
            crowd.roster.len(),
            crowd.abort,
            jam.abort,
            jam.duration_ms,
            liars.len()
        ),
    );
}

#[test]
fn criterion_09_motion_filter() {
    let protocol = ProtocolConfig::default();
    let trials = 1000;

    let mut cfg = ScenarioConfig::default();
    cfg.counts.attacker_nodes = 0;
    cfg.channel.measurement_std = 1.0;
    let (mut passed, mut total) = (0usize, 0usize);
    for k in 0..trials {
        let seed = trial_seed(909, k);
        let world = build_world(&cfg, seed).unwrap();
        let out = run_round(&world, &protocol, seed ^ 2).unwrap();
        for id in world.ids().into_iter().filter(|i| *i != world.initiator) {
            total += 1;
            passed += usize::from(!out.rejected.contains_key(&id));
        }
    }
    let pass_rate = passed as f64 / total as f64;

    let mut cfg = ScenarioConfig::default();
    cfg.attacker.kind = AttackerKind::Mobile;
    cfg.attacker.switch_latency_ms = 100.0;
    let mut caught = 0;
    let mut reasons = [0usize; 3];
    for k in 0..trials {
        let seed = trial_seed(910, k);
        let world = build_world(&cfg, seed).unwrap();
        let out = run_round(&world, &protocol, seed ^ 2).unwrap();
        let sybils: Vec<IdentityId> = world.ids().into_iter().filter(|i| world.truth(*i) == Some(Truth::Sybil)).collect();
        for s in &sybils {
            match out.rejected.get(s) {
                Some(RejectReason::Moving) => reasons[0] += 1,
                Some(RejectReason::Late) => reasons[1] += 1,
                Some(RejectReason::TooFewProbes) => reasons[2] += 1,
                None => {}
            }
        }
        caught += usize::from(!sybils.is_empty() && sybils.iter().all(|s| out.rejected.contains_key(s)));
    }
    let catch_rate = caught as f64 / trials as f64;
    report(
        9,
        pass_rate >= 0.95 && catch_rate >= 0.99,
        format!(
            "stationary pass rate {pass_rate:.4} over {total} identities; mobile attacker (100 ms) fully rejected in {caught}/{trials} trials (moving/late/too-few: {reasons:?})"
        ),
    );
}

fn classify_time(identities: usize, liars: bool, repeats: usize) -> f64 {
    let lns = if liars { identities / 10 } else { 0 };
    let sybils = 3;
    let p = CaseParams {
        conforming: identities - 1 - lns - sybils,
        lying_nonsybil: lns,
        sybils,
        lies: Lies::HonestSybils,
    };
    let mut case = synthetic_case(&p, 1010 + identities as u64).unwrap();
    // Liars frame everyone: each reports the initiator's readings shifted
    // by a constant, so its pair view merges every other identity.
    let ids = case.obs.identities().to_vec();
    for (&l, _) in case.truth.iter().filter(|(_, t)| **t == Truth::LyingNonsybil) {
        for &x in ids.iter().filter(|&&x| x != l && x != case.initiator) {
            let shifted = case.obs.get(case.initiator, x, 0).map(|v| v - 12.5);
            case.obs.set(l, x, 0, shifted).unwrap();
        }
    }
    let cfg = ClassifierConfig::<f64> { thresholds: SignalprintThresholds::uniform(GRID), seed: 7, ..Default::default() };
    let mut best = f64::INFINITY;
    for _ in 0..repeats {
        let start = Instant::now();
        let r = classify(case.initiator, &case.obs, &cfg, Policy::Consistency).unwrap();
        best = best.min(start.elapsed().as_secs_f64());
        assert_eq!(r.early_exit, !liars, "{identities} identities");
        let framers = case.truth.iter().filter(|(_, t)| **t == Truth::LyingNonsybil);
        assert!(framers.into_iter().all(|(l, _)| r.excluded.contains(l) || !r.selected_view.nonsybil.contains(l)));
    }
    best
}

fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum::<f64>()
}

#[test]
fn criterion_10_classification_scaling() {
    let sizes = [25usize, 50, 100, 200];
    let with: Vec<(f64, f64)> = sizes.iter().map(|&n| (n as f64, classify_time(n, true, 3))).collect();
    let without: Vec<(f64, f64)> = sizes.iter().map(|&n| (n as f64, classify_time(n, false, 5))).collect();
    let (s_with, s_without) = (loglog_slope(&with), loglog_slope(&without));
    report(
        10,
        (2.0..=3.5).contains(&s_with) && s_without <= 2.5,
        format!(
            "log-log slope with liars {s_with:.2} (times {:?} ms), liar-free {s_without:.2} (times {:?} ms)",
            with.iter().map(|p| (p.1 * 1e3 * 100.0).round() / 100.0).collect::<Vec<_>>(),
            without.iter().map(|p| (p.1 * 1e3 * 100.0).round() / 100.0).collect::<Vec<_>>()
        ),
    );
}

fn outputs(cfg: &ScenarioConfig, threads: usize) -> Vec<Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let mut out = Vec::new();
        let trials = run_trials(cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &trials).unwrap();
        out.push(buf);
        let mut buf = Vec::new();
        write_csv(&mut buf, &[Summary::from_trials(&trials)]).unwrap();
        out.push(buf);
        for k in 0..cfg.trials {
            out.push(trial_trace(cfg, k).unwrap().unwrap().render().into_bytes());
        }
        let mut buf = Vec::new();
        write_csv(&mut buf, &sweep_grid(cfg).unwrap()).unwrap();
        out.push(buf);
        let mut buf = Vec::new();
        write_csv(&mut buf, &roc_curve(&roc_samples(cfg).unwrap(), &cfg.roc.thresholds)).unwrap();
        out.push(buf);
        out
    })
}

#[test]
fn criterion_11_outputs_repeat_byte_for_byte() {
    let mut cfg = ScenarioConfig { seed: 1111, trials: 12, ..Default::default() };
    cfg.counts.lying_nonsybil = 2;
    cfg.sweep.conforming = vec![5, 10];
    cfg.sweep.lying_nonsybil = vec![0, 2];
    let a = outputs(&cfg, 1);
    let b = outputs(&cfg, 4);
    let c = outputs(&cfg, 4);
    let same = a == b && b == c;
    let bytes: usize = a.iter().map(Vec::len).sum();
    report(11, same, format!("{} artifacts ({bytes} bytes) identical across 1 and 4 threads and reruns: {same}", a.len()));
}
