use std::sync::OnceLock;

const ORDER: usize = 20;
const MIN_PANELS: usize = 8;
const MAX_PANELS: usize = 1 << 14;

/// Successive panel-doubling estimates must agree to this.
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes and weights of the Gauss–Legendre rule on [-1, 1].
fn rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        (0..n)
            .map(|i| {
                let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                for _ in 0..100 {
                    let (p, dp) = legendre(n, x);
                    let dx = p / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                let (_, dp) = legendre(n, x);
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    })
}

fn panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut total = 0.0;
    for j in 0..m {
        let mid = a + (j as f64 + 0.5) * h;
        let half = 0.5 * h;
        let s: f64 = rule().iter().map(|&(x, w)| w * f(mid + half * x)).sum();
        total += half * s;
    }
    total
}

/// `∫_a^b f` by composite Gauss–Legendre panels, doubling the panel count
/// until two successive estimates differ by less than the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut m = MIN_PANELS;
    let mut prev = panels(&f, a, b, m);
    while m < MAX_PANELS {
        m *= 2;
        let next = panels(&f, a, b, m);
        if (next - prev).abs() < QUADRATURE_TOLERANCE {
            return next;
        }
        prev = next;
    }
    prev
}
