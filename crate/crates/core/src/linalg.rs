//! Dense complex matrix helpers shared by every module.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn diag_real(values: &[f64]) -> CMat {
    let n = values.len();
    let mut m = zeros(n);
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = c(*v, 0.0);
    }
    m
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMat::from_fn(n, m, |i, j| c(rows[i][j], 0.0))
}

pub fn commutator(x: &CMat, y: &CMat) -> CMat {
    x * y - y * x
}

pub fn anticommutator(x: &CMat, y: &CMat) -> CMat {
    x * y + y * x
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Operator (spectral) norm.
pub fn op_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0, |a: f64, s| a.max(*s))
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    op_norm(&(m - m.adjoint()))
}

pub fn is_self_adjoint(m: &CMat) -> bool {
    hermitian_defect(m) <= 1e-10 * op_norm(m).max(1.0)
}

/// Kronecker product `x ⊗ y` in row-major block order.
pub fn kron(x: &CMat, y: &CMat) -> CMat {
    x.kronecker(y)
}

/// Neumaier-compensated complex accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    sum: C64,
    comp: C64,
    abs: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: C64) {
        self.abs += x.norm();
        self.sum.re = neumaier(self.sum.re, x.re, &mut self.comp.re);
        self.sum.im = neumaier(self.sum.im, x.im, &mut self.comp.im);
    }

    pub fn value(&self) -> C64 {
        self.sum + self.comp
    }

    /// Sum of the magnitudes of everything added so far.
    pub fn abs_sum(&self) -> f64 {
        self.abs
    }
}

fn neumaier(sum: f64, x: f64, comp: &mut f64) -> f64 {
    let t = sum + x;
    if sum.abs() >= x.abs() {
        *comp += (sum - t) + x;
    } else {
        *comp += (x - t) + sum;
    }
    t
}

pub fn compensated_sum<I: IntoIterator<Item = C64>>(items: I) -> C64 {
    let mut acc = Accumulator::new();
    for x in items {
        acc.add(x);
    }
    acc.value()
}

pub fn compensated_sum_real<I: IntoIterator<Item = f64>>(items: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in items {
        sum = neumaier(sum, x, &mut comp);
    }
    sum + comp
}

pub fn random_complex<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let x = random_complex(rng, n, n);
    (&x + x.adjoint()) * c(0.5, 0.0)
}

pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let x = random_complex(rng, n, n);
    let qr = x.qr();
    qr.q()
}

/// Orthonormal basis (as columns) of the range of a Hermitian projection.
pub fn range_basis(p: &CMat, tol: f64) -> CMat {
    let n = p.nrows();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let eig = p.clone().symmetric_eigen();
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5 + tol.min(0.25)).collect();
    let mut out = CMat::zeros(n, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        out.set_column(k, &eig.eigenvectors.column(i));
    }
    out
}

/// `e^{isH}` for Hermitian `H`.
pub fn unitary_flow(h: &CMat, s: f64) -> CMat {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = CMat::from_diagonal(&eig.eigenvalues.map(|l| C64::new(0.0, s * l).exp()));
    v * phases * v.adjoint()
}
