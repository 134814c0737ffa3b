//! Gauss-Legendre nodes and weights on [-1, 1].

/// Compute the n-point Gauss-Legendre rule by Newton iteration on P_n.
///
/// Returns (nodes, weights) with nodes in ascending order. The rule is
/// exact for polynomials of degree <= 2n - 1 and the weights sum to 2.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton
        let mut xi = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_pd(n, xi);
            let dx = p / d;
            xi -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_pd(n, xi);
        let wi = 2.0 / ((1.0 - xi * xi) * dp * dp);
        // xi from the cos guess is near +1 for small i; store ascending
        x[n - 1 - i] = xi;
        x[i] = -xi;
        w[n - 1 - i] = wi;
        w[i] = wi;
    }
    if n % 2 == 1 {
        let (_, d) = legendre_pd(n, 0.0);
        x[n / 2] = 0.0;
        w[n / 2] = 2.0 / (d * d);
    }
    (x, w)
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre_pd(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
