//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::time::{Duration, Instant};

use dtpc_ident::bounds::{converse_trend, di_capacity_bounds, dif_capacity_lower};
use dtpc_ident::channel::{sample_counts, validate_power, ChannelParams, PowerConstraints};
use dtpc_ident::di_code::{
    calibrate_threshold_to, construct_codebook, estimate_errors, memory_scaling, packing_log_count_bound, power_ball_radius,
    CalibrationRule, ConstructionStrategy,
};
use dtpc_ident::dif_protocol::{
    blockize, build_dif_code, build_pilot, collision_bound_check, estimate_dif_errors, estimate_inner_error,
    hash_message, DifSettings, HashFamily, DEFAULT_TYPICALITY_TAIL,
};
use dtpc_ident::measures::{
    bhattacharyya, min_distance_radius, poisson_bhattacharyya_sq, poisson_entropy_approx, poisson_entropy_exact,
    poisson_pmf_truncated, tv_distance, DEFAULT_TAIL_MASS,
};
use dtpc_ident::rng::{labelled_rng, StreamKey};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn fig2() -> ChannelParams {
    ChannelParams::new(vec![0.6, 0.3, 0.1], 1.0, 0.1).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bhattacharyya_closed_form() -> Outcome {
    let mut rng = labelled_rng(101, &[]);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (a, b) = (rng.random_range(0.0..=50.0), rng.random_range(0.0..=50.0));
        let f = bhattacharyya(
            &poisson_pmf_truncated(a, 1e-20).unwrap(),
            &poisson_pmf_truncated(b, 1e-20).unwrap(),
        );
        worst = worst.max((poisson_bhattacharyya_sq(a, b) - f * f).abs());
    }
    check(worst <= 1e-9, format!("max |closed - summed^2| = {worst:.3e} over 50 pairs"))
}

fn tv_sandwich() -> Outcome {
    const SLACK: f64 = 1e-6;
    let mut rng = labelled_rng(102, &[]);
    let mut violations = 0;
    for _ in 0..1000 {
        let (a, b) = (rng.random_range(0.0..=50.0), rng.random_range(0.0..=50.0));
        let (q1, q2) = (
            poisson_pmf_truncated(a, DEFAULT_TAIL_MASS).unwrap(),
            poisson_pmf_truncated(b, DEFAULT_TAIL_MASS).unwrap(),
        );
        let f = bhattacharyya(&q1, &q2);
        let d = tv_distance(&q1, &q2);
        if !(1.0 - f <= d + SLACK && d <= (1.0 - f * f).max(0.0).sqrt() + SLACK) {
            violations += 1;
        }
    }
    check(violations == 0, format!("{violations} violations over 1000 pairs"))
}

fn bound_endpoints() -> Outcome {
    let a = di_capacity_bounds(0.0).unwrap();
    let b = di_capacity_bounds(0.5).unwrap();
    check(
        a == (0.25, 0.5) && b == (0.125, 0.75),
        format!("kappa=0 -> {a:?}, kappa=0.5 -> {b:?}"),
    )
}

fn converse_trend_check() -> Outcome {
    let c = PowerConstraints::new(1.0, 1.0).unwrap();
    let ns = [64, 256, 1024, 4096, 16384];
    let trend = converse_trend(&ns, 0.25, &fig2(), &c, 0.1, 0.1).unwrap();
    let gaps: Vec<f64> = trend.iter().map(|v| (v.normalized - 0.625).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = *gaps.last().unwrap();
    let values: Vec<String> = trend.iter().map(|v| format!("{}:{:.4}", v.n, v.normalized)).collect();
    check(
        monotone && last <= 0.15,
        format!("normalized {} (monotone={monotone}, final gap {last:.4})", values.join(" ")),
    )
}

fn codebook_structure() -> Outcome {
    let params = fig2();
    let c = PowerConstraints::new(10.0, 5.0).unwrap();
    let r = min_distance_radius(0.1, 0.1).unwrap();
    let mut notes = Vec::new();
    let mut ok = true;
    for n in [16usize, 32, 64] {
        for (label, strategy) in [
            ("packing", ConstructionStrategy::default()),
            ("separated", ConstructionStrategy { separation: 4.0, ..Default::default() }),
        ] {
            let book = construct_codebook(n, &params, &c, 0.1, 0.1, &strategy, 500 + n as u64).unwrap();
            let g = book.geometry(Some(0.25)).unwrap();
            let ball = power_ball_radius(n, &params, &c, memory_scaling(n, 0.25).unwrap()).unwrap();
            let power = book.codewords().iter().all(|x| validate_power(x, &c));
            let dmin = book.min_pairwise_distance().map_or(f64::INFINITY, |d| d.0);
            let contained = (0..book.len()).all(|i| book.reparam(i).norm_sq() <= ball.radius * ball.radius * (1.0 + 1e-12));
            let bound = packing_log_count_bound(&g).unwrap();
            let counted = (book.len() as f64).log2() <= bound;
            ok &= power && dmin >= 2.0 * r && contained && counted;
            notes.push(format!("n={n}/{label}: N={} dmin={dmin:.2} log2N<={bound:.1}", book.len()));
        }
    }
    check(ok, notes.join("; "))
}

fn di_monte_carlo() -> Outcome {
    let params = fig2();
    let c = PowerConstraints::new(10.0, 5.0).unwrap();
    let strategy = ConstructionStrategy {
        separation: 4.0,
        ..Default::default()
    };
    let mut book = construct_codebook(32, &params, &c, 0.1, 0.1, &strategy, 6001).unwrap();
    let theta = calibrate_threshold_to(&mut book, 0.08, 20_000, 6002, CalibrationRule::PointEstimate).unwrap();
    let sim = estimate_errors(&book, 10_000, 6003).unwrap();
    let (t1, t2) = (sim.type_one_upper(), sim.type_two_upper());
    check(
        t1 <= 0.1 && t2 <= 0.1,
        format!("N={} theta={theta:.3}: max Type I upper {t1:.4}, max Type II upper {t2:.4}", book.len()),
    )
}

fn dif_end_to_end() -> Outcome {
    let params = fig2();
    let trials = 10_000u64;
    let settings = DifSettings {
        n: 900,
        peak: 5.0,
        avg: 5.0,
        epsilon: 0.2,
        typicality_tail: DEFAULT_TYPICALITY_TAIL,
        messages: 1 << 20,
        range: Some(64),
        lambda2: 0.1,
        seed: 7001,
    };
    let code = build_dif_code(&params, &settings).unwrap();
    if code.pilot.full_blocks() != 300 || code.inner.length() != 30 {
        return Err("unexpected block count or inner length".into());
    }
    let pairs = [(1, 2), (2, 3), (3, 4), (4, 1)];
    let sim = estimate_dif_errors(&code, &pairs, trials, 7002).unwrap();
    let inner = estimate_inner_error(&code.inner, &params, &code.pilot.input(), trials, 7003).unwrap();
    let t1 = sim.max_type_one().unwrap().error.estimate;
    let t2 = sim.max_type_two().unwrap().error.estimate;
    let predicted = 1.0 / 64.0 + inner.estimate;
    let sigma = (predicted * (1.0 - predicted) / trials as f64).sqrt();
    let pooled = sim.type_two.iter().map(|p| p.error.errors).sum::<u64>() as f64 / (pairs.len() as u64 * trials) as f64;
    check(
        t1 <= 0.05 && (t2 - predicted).abs() <= 2.0 * sigma,
        format!(
            "max Type I {t1:.4}; max Type II {t2:.4} vs 1/M + inner {predicted:.4} +- 2*{sigma:.4} (pooled {pooled:.4}, inner {:.4})",
            inner.estimate
        ),
    )
}

fn hash_uniformity() -> Outcome {
    let params = fig2();
    let pilot = build_pilot(90, &params, 5.0).unwrap();
    let mu = dtpc_ident::channel::effective_intensity(&dtpc_ident::channel::Codeword::new(pilot.input()).unwrap(), &params);
    let family = HashFamily::new(8001, 1 << 20, 64).unwrap();
    let draws = 100_000u64;
    let mut rng = labelled_rng(8002, &[]);
    let mut bins = [0u64; 64];
    let mut collisions = 0u64;
    for t in 0..draws {
        let y = sample_counts(&mu.as_slice()[..90], StreamKey::with_trial(8003, t));
        let blocks = blockize(&y, params.memory());
        let i = rng.random_range(1..=family.messages);
        let j = loop {
            let j = rng.random_range(1..=family.messages);
            if j != i {
                break j;
            }
        };
        let hi = hash_message(i, &blocks, &family).unwrap();
        bins[(hi - 1) as usize] += 1;
        if hi == hash_message(j, &blocks, &family).unwrap() {
            collisions += 1;
        }
    }
    let expected = draws as f64 / 64.0;
    let chi2: f64 = bins.iter().map(|&b| (b as f64 - expected).powi(2) / expected).sum();
    // 99th percentile of chi-square with 63 degrees of freedom
    let critical = 92.010_023_614_132_14;
    let p = 1.0 / 64.0;
    let rate = collisions as f64 / draws as f64;
    let sigma = (p * (1.0 - p) / draws as f64).sqrt();
    check(
        chi2 < critical && (rate - p).abs() <= 3.0 * sigma,
        format!("chi2 = {chi2:.2} (< {critical:.2}); collision rate {rate:.5} vs {p:.5} +- 3*{sigma:.5}"),
    )
}

fn entropy_asymptotics() -> Outcome {
    let d10 = (poisson_entropy_exact(10.0, DEFAULT_TAIL_MASS).unwrap() - poisson_entropy_approx(10.0).unwrap()).abs();
    let d100 = (poisson_entropy_exact(100.0, DEFAULT_TAIL_MASS).unwrap() - poisson_entropy_approx(100.0).unwrap()).abs();
    let params = ChannelParams::memoryless(1.0, 0.1).unwrap();
    let gaps: Vec<f64> = [5.0, 10.0, 20.0, 40.0, 80.0]
        .iter()
        .map(|&e| {
            let (exact, asym) = dif_capacity_lower(&params, e).unwrap();
            (exact - asym).abs()
        })
        .collect();
    let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
    check(
        d10 < 0.01 && d100 < 0.0005 && shrinking,
        format!("|H - approx| = {d10:.2e} at 10, {d100:.2e} at 100; |gap| {gaps:.5?}"),
    )
}

fn collision_union_bound() -> Outcome {
    let mut ok = true;
    for l in [0.0, 1.0, 2.0, 4.0, 8.0, 16.0] {
        let top = f64::exp2(l);
        for log2_n in [0.0, 1.0, 0.5 * top, top] {
            ok &= collision_bound_check(log2_n, 16, 0.5, l).unwrap();
        }
        for (m, lambda2) in [(16u64, 0.25), (64, 0.1), (1024, 0.05)] {
            for log2_n in [1.0, top, 64.0] {
                ok &= !collision_bound_check(log2_n, m, lambda2, l).unwrap();
            }
        }
    }
    check(ok, "feasible up to N = 2^(2^L) at lambda2 log2 M = 2; infeasible at <= 1".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed-form vs summed Bhattacharyya", Duration::from_secs(5), bhattacharyya_closed_form),
        ("TV / fidelity sandwich", Duration::from_secs(30), tv_sandwich),
        ("DI capacity bound endpoints", Duration::from_secs(1), bound_endpoints),
        ("finite-n converse trend", Duration::from_secs(1), converse_trend_check),
        ("codebook structure", Duration::from_secs(120), codebook_structure),
        ("DI Monte Carlo error budgets", Duration::from_secs(300), di_monte_carlo),
        ("DIF end to end", Duration::from_secs(600), dif_end_to_end),
        ("hash uniformity and collisions", Duration::from_secs(60), hash_uniformity),
        ("entropy asymptotics", Duration::from_secs(10), entropy_asymptotics),
        ("collision union bound", Duration::from_secs(1), collision_union_bound),
    ];
    let mut failed = 0;
    for (idx, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Ok(d) if elapsed <= *limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took {elapsed:.2?} > {limit:?}")),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("acceptance {:>2} {status} {name} [{elapsed:.2?}]: {detail}", idx + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
