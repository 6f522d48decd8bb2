//! Divided differences of the exponential through the bidiagonal matrix
//! exponential: for `M = diag(−x_0, …, −x_m) + superdiag(1)`,
//! `[exp M]_{0,m} = ∫_{Δ_m} exp(−Σ_j s_j x_j) ds`.

/// `∫_{Δ_m} exp(−Σ s_j x_j) ds` over the standard simplex `Σ s_j = 1, s_j ≥ 0`.
///
/// Equal or nearly equal nodes are handled without cancellation.
pub fn simplex_exp_integral(nodes: &[f64]) -> f64 {
    let n = nodes.len();
    assert!(n >= 1, "need at least one node");
    let shift = nodes.iter().copied().fold(f64::INFINITY, f64::min);
    if n == 1 {
        return (-nodes[0]).exp();
    }
    // shifted diagonal is ≤ 0, so exp(M + shift) has entries in [0, 1]
    let diag: Vec<f64> = nodes.iter().map(|x| shift - x).collect();
    let norm = diag.iter().fold(0.0_f64, |a, d| a.max(d.abs())) + 1.0;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = 0.5_f64.powi(squarings as i32);

    let mut a = Tri::zeros(n);
    for i in 0..n {
        a.set(i, i, diag[i] * scale);
        if i + 1 < n {
            a.set(i, i + 1, scale);
        }
    }
    let mut e = Tri::identity(n);
    let mut term = Tri::identity(n);
    for k in 1..40 {
        term = term.mul(&a);
        term.scale(1.0 / k as f64);
        e.add_assign(&term);
        if term.max_abs() < 1e-18 * e.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        e = e.mul(&e);
    }
    e.get(0, n - 1) * (-shift).exp()
}

/// Dense upper-triangular storage for the small bidiagonal exponentials.
#[derive(Clone)]
struct Tri {
    n: usize,
    v: Vec<f64>,
}

impl Tri {
    fn zeros(n: usize) -> Self {
        Self { n, v: vec![0.0; n * n] }
    }

    fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n);
        for i in 0..n {
            t.set(i, i, 1.0);
        }
        t
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.v[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, x: f64) {
        self.v[i * self.n + j] = x;
    }

    fn mul(&self, o: &Tri) -> Tri {
        let n = self.n;
        let mut r = Tri::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in i..=j {
                    s += self.get(i, k) * o.get(k, j);
                }
                r.set(i, j, s);
            }
        }
        r
    }

    fn scale(&mut self, s: f64) {
        for x in &mut self.v {
            *x *= s;
        }
    }

    fn add_assign(&mut self, o: &Tri) {
        for (x, y) in self.v.iter_mut().zip(&o.v) {
            *x += y;
        }
    }

    fn max_abs(&self) -> f64 {
        self.v.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
    }
}
