//! Double-double reference forward pass for the unrolled networks, used to
//! take finite differences well below the float64 rounding floor.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use greedy_unfold::autodiff::{NetFamily, NetSpec};
use greedy_unfold::linalg::DenseMatrix;
use greedy_unfold::scalar::Scalar;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.319_046_813_846_299_6e-17,
    };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn scale(self, s: f64) -> Self {
        self * Dd::new(s)
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let s = Dd::new(self.hi.sqrt());
        s + (self - s * s) / (s + s)
    }

    /// `exp(x)` for `x <= 0`, by reduction to `|r| <= ln2 / 2` and a Taylor series.
    pub fn exp(self) -> Self {
        let k = (self.to_f64() / std::f64::consts::LN_2).round();
        let r = self - Dd::LN2.scale(k);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for i in 1..40 {
            term = term * r / Dd::new(i as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        sum.scale(2f64.powi(k as i32))
    }

    pub fn cmp(&self, other: &Self) -> Ordering {
        self.hi.total_cmp(&other.hi).then(self.lo.total_cmp(&other.lo))
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + -o
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi));
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::new(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Cdd {
    pub re: Dd,
    pub im: Dd,
}

impl Cdd {
    pub const ZERO: Cdd = Cdd { re: Dd::ZERO, im: Dd::ZERO };

    pub fn from<T: Scalar>(t: T) -> Self {
        Cdd {
            re: Dd::new(t.re()),
            im: Dd::new(t.im()),
        }
    }

    pub fn real(re: Dd) -> Self {
        Cdd { re, im: Dd::ZERO }
    }

    pub fn conj(self) -> Self {
        Cdd { re: self.re, im: -self.im }
    }

    pub fn norm_sq(self) -> Dd {
        self.re * self.re + self.im * self.im
    }

    pub fn modulus(self) -> Dd {
        self.norm_sq().sqrt()
    }

    pub fn scale(self, s: Dd) -> Self {
        Cdd {
            re: self.re * s,
            im: self.im * s,
        }
    }
}

impl Add for Cdd {
    type Output = Cdd;
    fn add(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }
}

impl Sub for Cdd {
    type Output = Cdd;
    fn sub(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re - o.re,
            im: self.im - o.im,
        }
    }
}

impl Mul for Cdd {
    type Output = Cdd;
    fn mul(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

impl Div for Cdd {
    type Output = Cdd;
    fn div(self, o: Cdd) -> Cdd {
        let d = o.norm_sq();
        let n = self * o.conj();
        Cdd {
            re: n.re / d,
            im: n.im / d,
        }
    }
}

/// Column-major copy of a matrix.
pub struct DdMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Cdd>,
}

impl DdMatrix {
    pub fn from<T: Scalar>(a: &DenseMatrix<T>) -> Self {
        DdMatrix {
            rows: a.rows(),
            cols: a.cols(),
            data: a.as_slice().iter().map(|&t| Cdd::from(t)).collect(),
        }
    }

    fn col(&self, j: usize) -> &[Cdd] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn matvec(&self, x: &[Cdd]) -> Vec<Cdd> {
        let mut out = vec![Cdd::ZERO; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.col(j)) {
                *o = *o + a * xj;
            }
        }
        out
    }

    fn adjoint(&self, r: &[Cdd]) -> Vec<Cdd> {
        (0..self.cols)
            .map(|j| {
                self.col(j)
                    .iter()
                    .zip(r)
                    .fold(Cdd::ZERO, |acc, (&a, &ri)| acc + a.conj() * ri)
            })
            .collect()
    }
}

fn softmax_row(v: &[Dd], pivot: usize, tau: f64) -> Vec<Dd> {
    let e: Vec<Dd> = v
        .iter()
        .map(|&x| (-(v[pivot] - x).abs() / Dd::new(tau)).exp())
        .collect();
    let total = e.iter().fold(Dd::ZERO, |a, &b| a + b);
    e.into_iter().map(|x| x / total).collect()
}

/// Minimizer of `||B z - y||` via the normal equations with partial pivoting.
fn least_squares(cols: &[Vec<Cdd>], y: &[Cdd]) -> Vec<Cdd> {
    let l = cols.len();
    let dot = |a: &[Cdd], b: &[Cdd]| a.iter().zip(b).fold(Cdd::ZERO, |acc, (&x, &y)| acc + x.conj() * y);
    let mut g: Vec<Vec<Cdd>> = (0..l)
        .map(|i| {
            let mut row: Vec<Cdd> = (0..l).map(|j| dot(&cols[i], &cols[j])).collect();
            row.push(dot(&cols[i], y));
            row
        })
        .collect();
    for c in 0..l {
        let p = (c..l)
            .max_by(|&a, &b| g[a][c].norm_sq().cmp(&g[b][c].norm_sq()))
            .unwrap();
        g.swap(c, p);
        for r in c + 1..l {
            let f = g[r][c] / g[c][c];
            for k in c..=l {
                let t = g[c][k];
                g[r][k] = g[r][k] - f * t;
            }
        }
    }
    let mut z = vec![Cdd::ZERO; l];
    for i in (0..l).rev() {
        let mut acc = g[i][l];
        for k in i + 1..l {
            acc = acc - g[i][k] * z[k];
        }
        z[i] = acc / g[i][i];
    }
    z
}

fn weighted(w: &[Dd], z: &[Cdd]) -> Vec<Dd> {
    w.iter().zip(z).map(|(&wi, zi)| wi * zi.modulus()).collect()
}

fn argmax(v: &[Dd]) -> usize {
    (0..v.len()).fold(0, |best, j| if v[j].cmp(&v[best]) == Ordering::Greater { j } else { best })
}

/// Network output evaluated entirely in double-double arithmetic.
pub fn net_output(net: &NetSpec, w: &[Dd], a: &DdMatrix, y: &[Cdd]) -> Vec<Cdd> {
    let n = a.cols;
    let mut x = vec![Cdd::ZERO; n];
    let mut b_cols: Vec<Vec<Cdd>> = Vec::new();
    let mut rows: Vec<Vec<Dd>> = Vec::new();
    for _ in 0..net.layers {
        let ax = a.matvec(&x);
        let r: Vec<Cdd> = y.iter().zip(&ax).map(|(&yi, &v)| yi - v).collect();
        let c = a.adjoint(&r);
        match net.family {
            NetFamily::Omp => {
                let v = weighted(w, &c);
                let p = softmax_row(&v, argmax(&v), net.tau);
                let pc: Vec<Cdd> = p.iter().map(|&t| Cdd::real(t)).collect();
                b_cols.push(a.matvec(&pc));
                rows.push(p);
                let z = least_squares(&b_cols, y);
                x = (0..n)
                    .map(|j| {
                        rows.iter()
                            .zip(&z)
                            .fold(Cdd::ZERO, |acc, (p, &zi)| acc + zi.scale(p[j]))
                    })
                    .collect();
            }
            NetFamily::Iht => {
                let eta = Dd::new(net.eta);
                let u: Vec<Cdd> = x.iter().zip(&c).map(|(&xi, &ci)| xi + ci.scale(eta)).collect();
                let v = weighted(w, &u);
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&i, &j| v[j].cmp(&v[i]).then(i.cmp(&j)));
                let mut q = vec![Dd::ZERO; n];
                for &pivot in &order[..net.k] {
                    for (qj, pj) in q.iter_mut().zip(softmax_row(&v, pivot, net.tau)) {
                        *qj = *qj + pj;
                    }
                }
                x = u.iter().zip(&q).map(|(&ui, &qi)| ui.scale(qi)).collect();
            }
        }
    }
    x
}

pub fn loss(out: &[Cdd], target: &[Cdd]) -> Dd {
    out.iter().zip(target).fold(Dd::ZERO, |acc, (&o, &t)| acc + (o - t).norm_sq())
}

/// Central difference of the loss along coordinate `j` with step `h`.
pub fn central_difference<T: Scalar>(
    net: &NetSpec,
    w: &[f64],
    a: &DenseMatrix<T>,
    y: &[T],
    x_true: &[T],
    j: usize,
    h: f64,
) -> f64 {
    let a = DdMatrix::from(a);
    let y: Vec<Cdd> = y.iter().map(|&t| Cdd::from(t)).collect();
    let target: Vec<Cdd> = x_true.iter().map(|&t| Cdd::from(t)).collect();
    let at = |delta: f64| {
        let mut wd: Vec<Dd> = w.iter().map(|&v| Dd::new(v)).collect();
        wd[j] = wd[j] + Dd::new(delta);
        loss(&net_output(net, &wd, &a, &y), &target)
    };
    ((at(h) - at(-h)) / Dd::new(2.0 * h)).to_f64()
}

/// Noisy Gaussian problem with weights in `[0.5, 1.5)`.
pub struct FdCase<T> {
    pub a: DenseMatrix<T>,
    pub y: Vec<T>,
    pub x: Vec<T>,
    pub w: Vec<f64>,
}

pub fn fd_case<T: super::Draw>(seed: u64, m: usize, n: usize, s: usize) -> FdCase<T> {
    use rand::Rng;
    let mut r = super::rng(seed);
    let a = super::gaussian::<T>(m, n, false, &mut r);
    let x = super::sparse::<T>(n, s, &mut r);
    let y = a
        .matvec(&x)
        .unwrap()
        .into_iter()
        .map(|v| v + T::draw(&mut r).scale(1e-3 / (m as f64).sqrt()))
        .collect();
    let w = (0..n).map(|_| r.random_range(0.5..1.5)).collect();
    FdCase { a, y, x, w }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FdSummary {
    pub checked: usize,
    pub failed: usize,
    pub worst: f64,
}

/// Compares every reverse-mode coordinate with `|g| > 1e-8` against a
/// double-double central difference with step `h`; a coordinate fails when
/// `|g - fd| > rel * |fd| + abs`.
pub fn fd_sweep<T: super::Draw>(
    net: &NetSpec,
    seeds: std::ops::Range<u64>,
    h: f64,
    rel: f64,
    abs: f64,
) -> FdSummary {
    let mut out = FdSummary::default();
    for seed in seeds {
        let c = fd_case::<T>(seed, 10, 20, 3);
        let g = greedy_unfold::autodiff::forward_backward(net, &c.w, &c.a, &c.y, &c.x).unwrap();
        for (j, &gj) in g.grad_w.iter().enumerate() {
            if gj.abs() > 1e-8 {
                let fd = central_difference(net, &c.w, &c.a, &c.y, &c.x, j, h);
                let err = (gj - fd).abs();
                out.checked += 1;
                out.failed += usize::from(!(err <= rel * fd.abs() + abs));
                out.worst = out.worst.max(err / fd.abs());
            }
        }
    }
    out
}
