#[path = "common/benchmarks.rs"]
mod benchmarks;

use benchmarks::*;
use podnet::calibration::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Composite Simpson rule.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn t_pdf(x: f64, df: f64) -> f64 {
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
}

/// Upper quantile by bisection on the integrated density.
fn t_quantile_by_quadrature(alpha: f64, df: f64) -> f64 {
    let target = 0.5 - alpha / 2.0;
    let (mut lo, mut hi) = (0.0, 100.0);
    for _ in 0..80 {
        let mid = (lo + hi) / 2.0;
        if simpson(|x| t_pdf(x, df), 0.0, mid, 20_000) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / 2.0
}

fn normal_quantile_by_quadrature(alpha: f64) -> f64 {
    let pdf = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let target = 0.5 - alpha / 2.0;
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..80 {
        let mid = (lo + hi) / 2.0;
        if simpson(pdf, 0.0, mid, 4_000) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / 2.0
}

#[test]
fn t_quantiles_match_integrated_density() {
    for df in [1.0, 2.0, 5.0, 10.0, 29.0, 58.0, 120.0] {
        for alpha in [0.10, 0.05, 0.01] {
            let lib = t_quantile(alpha, df);
            let oracle = t_quantile_by_quadrature(alpha, df);
            assert!((lib - oracle).abs() < 1e-6 * oracle.max(1.0), "df={df} alpha={alpha}: {lib} vs {oracle}");
        }
    }
    assert!((t_quantile(0.05, 58.0) - 2.001_717_484).abs() < 1e-8);
}

#[test]
fn normal_quantile_matches_integrated_density() {
    for alpha in [0.10, 0.05, 0.01] {
        let oracle = normal_quantile_by_quadrature(alpha);
        assert!((z_quantile(alpha) - oracle).abs() < 1e-9, "alpha={alpha}");
    }
    assert!((z_quantile(0.05) - 1.959_963_984_540_054).abs() < 1e-12);
}

/// t statistic for equal group sizes, written out independently of the pooled form.
fn equal_size_t(m1: f64, s1: f64, m2: f64, s2: f64, n: f64) -> f64 {
    (m1 - m2) / ((s1 * s1 + s2 * s2) / n).sqrt()
}

fn decide(r: &Row) -> TTestDecision {
    let a = SummaryStats::from_moments(r.m1, r.s1, 30, 0.05).unwrap();
    let b = SummaryStats::from_moments(r.m2, r.s2, 30, 0.05).unwrap();
    pooled_t_test(&a, &b, 0.05).unwrap()
}

#[test]
fn t_statistics_agree_with_the_equal_size_formula() {
    let expected = [
        (&POVRAY, [0.8492, -7.1892, 1.4829, -6.7336, -5.5996]),
        (&IOZONE, [1.7376, -11.9305, -9.2813, 17.5649, -11.4647]),
    ];
    for (table, ts) in expected {
        for (r, want) in table.iter().zip(ts) {
            let d = decide(r);
            let oracle = equal_size_t(r.m1, r.s1, r.m2, r.s2, 30.0);
            assert!((d.t_statistic - oracle).abs() < 1e-9, "C={}", r.c);
            assert!((d.t_statistic - want).abs() < 5e-5, "C={}: {}", r.c, d.t_statistic);
            assert_eq!(d.degrees_of_freedom, 58);
        }
    }
}

#[test]
fn verdicts_for_cpu_and_io_benchmarks() {
    for r in POVRAY.iter().filter(|r| r.c != 20).chain(IOZONE.iter()) {
        assert_eq!(!decide(r).reject_h0, r.same_mean, "C={}", r.c);
    }
}

#[test]
fn cells_whose_recorded_verdict_the_test_does_not_reproduce() {
    // recorded as equal means, but the statistics reject at 5%
    let povray_20 = decide(&POVRAY[4]);
    assert!(povray_20.reject_h0 && (povray_20.t_statistic + 5.5996).abs() < 1e-4);
    let same_host_4 = decide(&IPERF_SAME_HOST[1]);
    assert!(same_host_4.reject_h0 && (same_host_4.t_statistic + 5.33).abs() < 0.01);
    let cross_host_4 = decide(&IPERF_CROSS_HOST[1]);
    assert!(cross_host_4.reject_h0 && (cross_host_4.t_statistic - 2.1291).abs() < 1e-4);
}

#[test]
fn network_verdicts_outside_the_disputed_cells() {
    for r in IPERF_SAME_HOST.iter().chain(IPERF_CROSS_HOST.iter()).filter(|r| r.c != 4) {
        assert_eq!(!decide(r).reject_h0, r.same_mean, "C={}", r.c);
    }
}

#[test]
fn cross_host_overhead_from_bandwidth() {
    let bw = |m| MetricMean::new(Metric::BandwidthGb, m);
    let r = &IPERF_CROSS_HOST[2];
    let a = overhead_alpha(bw(r.m1).as_transfer_time(1.0).unwrap(), bw(r.m2).as_transfer_time(1.0).unwrap()).unwrap();
    assert!((a - 1.016_08).abs() < 1e-4);
    assert!(a > 1.0);
}

#[test]
fn confidence_interval_coverage() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let dist = Normal::new(10.0, 3.0).unwrap();
    let trials = 10_000;
    let mut covered = 0;
    let mut sample = vec![0.0; 30];
    for _ in 0..trials {
        for v in sample.iter_mut() {
            *v = dist.sample(&mut rng);
        }
        let s = summarize(&sample, 0.05).unwrap();
        if s.ci_low <= 10.0 && 10.0 <= s.ci_high {
            covered += 1;
        }
    }
    let rate = covered as f64 / trials as f64;
    assert!((rate - 0.95).abs() <= 0.015, "coverage {rate}");
}

#[test]
fn calibration_recovers_creation_time_from_deploy_rows() {
    let mut text = String::from("experiment,n,pods,containers,repetition,metric,value,unit\n");
    for (c, td) in [(1, 1.85), (5, 2.37), (10, 3.77), (20, 5.69), (40, 10.24)] {
        for rep in 0..3 {
            text.push_str(&format!("deploy,8,{c},{c},{rep},deploy_time_s,{td},s\n"));
        }
    }
    let samples = load_measurements(text.as_bytes()).unwrap();
    let cal = calibrate(&samples).unwrap();
    let table = cal.table.unwrap();
    let at40 = table.entries.iter().find(|e| e.containers == 40).unwrap();
    assert!((at40.creation_s - 2.048).abs() < 1e-12);
    // the single (rho, n) series sets the asymptote to its largest-C value
    assert!((table.asymptote_s - 2.048).abs() < 1e-12);
    assert!((table.creation_time(1.0, 8, 400).unwrap() - 2.048).abs() < 1e-12);
    let at1 = table.creation_time(1.0, 8, 1).unwrap();
    assert!((at1 - 1.85).abs() < 1e-12);
}

fn stats() -> impl Strategy<Value = SummaryStats> {
    (-1e3f64..1e3, 0.01f64..50.0, 2usize..200).prop_map(|(m, s, n)| SummaryStats::from_moments(m, s, n, 0.05).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn t_test_is_antisymmetric(a in stats(), b in stats()) {
        let ab = pooled_t_test(&a, &b, 0.05).unwrap();
        let ba = pooled_t_test(&b, &a, 0.05).unwrap();
        prop_assert!((ab.t_statistic + ba.t_statistic).abs() <= 1e-12 * ab.t_statistic.abs().max(1.0));
        prop_assert_eq!(ab.reject_h0, ba.reject_h0);
        prop_assert_eq!(ab.critical_value, ba.critical_value);
    }

    #[test]
    fn t_test_is_scale_and_shift_equivariant(a in stats(), b in stats(), k in 0.01f64..100.0, shift in -1e3f64..1e3) {
        let scale = |s: &SummaryStats| SummaryStats::from_moments(k * s.mean + shift, k * s.std, s.count, 0.05).unwrap();
        let base = pooled_t_test(&a, &b, 0.05).unwrap();
        let scaled = pooled_t_test(&scale(&a), &scale(&b), 0.05).unwrap();
        prop_assert!((base.t_statistic - scaled.t_statistic).abs() <= 1e-6 * base.t_statistic.abs().max(1.0));
        if (base.t_statistic.abs() - base.critical_value).abs() > 1e-6 {
            prop_assert_eq!(base.reject_h0, scaled.reject_h0);
        }
    }

    #[test]
    fn deploy_formula_round_trips(c in 1u64..500, pods_frac in 0.0f64..1.0, n in 1u64..64, tc in 0.01f64..20.0) {
        let pods = 1 + ((c - 1) as f64 * pods_frac) as u64;
        let td = predict_deploy_time(c, pods, n, tc);
        prop_assert!((creation_time_from_deploy(td, c, pods, n) - tc).abs() < 1e-9 * tc);
        prop_assert!(td >= tc - 1e-12);
    }

    #[test]
    fn measurement_csv_round_trips(rows in proptest::collection::vec((1u32..16, 1u32..8, 0u32..30, 0usize..5, 0.0f64..1e4), 0..20)) {
        let metrics = [Metric::DeployTimeS, Metric::TotalTimeS, Metric::ExecTimeS, Metric::BandwidthGb, Metric::StopTimeS];
        let samples: Vec<MeasurementSample> = rows
            .into_iter()
            .map(|(n, per_pod, rep, m, value)| MeasurementSample {
                experiment: format!("e{n}"),
                n,
                pods: n,
                containers: n * per_pod,
                repetition: rep,
                metric: metrics[m],
                value,
                unit: if metrics[m].is_time() { "s".into() } else { "GB".into() },
            })
            .collect();
        let mut buf = Vec::new();
        write_measurements(&samples, &mut buf).unwrap();
        prop_assert_eq!(load_measurements(buf.as_slice()).unwrap(), samples);
    }
}
