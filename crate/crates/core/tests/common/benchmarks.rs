//! Published benchmark summaries: execution time or bandwidth for grouped
//! containers (first pair) and one container per pod (second pair), 30 runs each.
#![allow(dead_code)]

pub struct Row {
    pub c: u32,
    pub m1: f64,
    pub s1: f64,
    pub m2: f64,
    pub s2: f64,
    /// Recorded verdict: no significant difference at 5%.
    pub same_mean: bool,
}

const fn row(c: u32, m1: f64, s1: f64, m2: f64, s2: f64, same_mean: bool) -> Row {
    Row { c, m1, s1, m2, s2, same_mean }
}

pub const POVRAY: [Row; 5] = [
    row(1, 123.47, 0.43, 123.38, 0.39, true),
    row(4, 473.65, 0.96, 475.15, 0.62, false),
    row(8, 946.90, 0.72, 946.63, 0.69, true),
    row(12, 1417.76, 1.67, 1420.40, 1.35, false),
    row(20, 2370.21, 1.16, 2374.36, 3.89, true),
];

pub const IOZONE: [Row; 5] = [
    row(1, 23.52, 0.82, 23.19, 0.64, true),
    row(4, 60.85, 1.45, 65.02, 1.25, false),
    row(8, 85.98, 2.25, 91.36, 2.24, false),
    row(12, 108.54, 4.14, 91.36, 3.40, false),
    row(20, 153.51, 6.47, 170.99, 5.28, false),
];

pub const IPERF_SAME_HOST: [Row; 5] = [
    row(1, 1.88, 0.06, 1.90, 0.04, true),
    row(4, 8.61, 0.21, 8.82, 0.05, true),
    row(8, 15.53, 0.12, 16.26, 0.20, false),
    row(12, 14.99, 0.21, 16.42, 0.38, false),
    row(20, 15.10, 0.19, 18.32, 0.91, false),
];

pub const IPERF_CROSS_HOST: [Row; 5] = [
    row(1, 108.26, 0.04, 108.26, 0.04, true),
    row(4, 110.53, 0.39, 110.17, 0.84, true),
    row(8, 113.81, 0.47, 115.64, 0.51, false),
    row(12, 117.42, 0.92, 117.53, 4.01, true),
    row(20, 124.74, 1.22, 126.52, 2.09, false),
];
