use nalgebra::DMatrix;

use crate::milp::DesignStructure;

/// Smallest accepted `lambda_min / lambda_max` of a relaxed information matrix.
const RATIO_TOL: f64 = 1e-10;
const GOLDEN_STEPS: usize = 40;

/// Criterion values at a (possibly fractional) design.
pub(crate) struct Evaluation {
    pub sigma: DMatrix<f64>,
    pub values: Vec<f64>,
}

impl Evaluation {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (l, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = l;
            }
        }
        best
    }
}

/// A tangent cut `phi + sum_i coeffs_i d_i >= rhs`.
#[derive(Debug, Clone)]
pub(crate) struct Cut {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Cut {
    /// Amount by which `(d, phi)` violates the cut.
    pub fn violation(&self, d: &[f64], phi: f64) -> f64 {
        self.rhs - phi - self.coeffs.iter().map(|&(i, a)| a * d[i]).sum::<f64>()
    }
}

pub(crate) enum FwOutcome {
    /// Every design in the box is infeasible or singular.
    Empty,
    Bound(FwResult),
}

pub(crate) struct FwResult {
    pub bound: f64,
    pub w: Vec<f64>,
    pub lambda: Vec<f64>,
    pub single_point: bool,
}

pub(crate) struct Relaxation<'a> {
    s: &'a DesignStructure,
}

fn inverse_checked(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= RATIO_TOL * max {
        return None;
    }
    let inv_vals = eig.eigenvalues.map(|v| 1.0 / v);
    let v = &eig.eigenvectors;
    Some(v * DMatrix::from_diagonal(&inv_vals) * v.transpose())
}

/// `tr(A B)`.
pub(crate) fn trace_prod(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let m = a.nrows();
    let mut t = 0.0;
    for j in 0..m {
        for k in 0..m {
            t += a[(j, k)] * b[(k, j)];
        }
    }
    t
}

impl<'a> Relaxation<'a> {
    pub fn new(s: &'a DesignStructure) -> Self {
        Self { s }
    }

    pub fn n(&self) -> usize {
        self.s.n()
    }

    pub fn k(&self) -> usize {
        self.s.grams.len()
    }

    pub fn evaluate(&self, w: &[f64]) -> Option<Evaluation> {
        let sigma = inverse_checked(&self.s.info(w))?;
        let values = self.s.grams.iter().map(|g| trace_prod(g, &sigma)).collect();
        Some(Evaluation { sigma, values })
    }

    fn gram(&self, lambda: &[f64]) -> DMatrix<f64> {
        let m = self.s.m();
        let mut g = DMatrix::zeros(m, m);
        for (gl, &l) in self.s.grams.iter().zip(lambda) {
            if l != 0.0 {
                g += gl * l;
            }
        }
        g
    }

    /// `d/dw_i tr(G M(w)^-1) = -tr(M_i Sigma G Sigma)`.
    fn gradient(&self, sigma: &DMatrix<f64>, g: &DMatrix<f64>) -> Vec<f64> {
        let a = sigma * g * sigma;
        self.s.elementary.iter().map(|mi| -trace_prod(mi, &a)).collect()
    }

    /// Tangent of `sum_l lambda_l tr(G_l M(w)^-1)` at `w`.
    pub fn tangent(&self, w: &[f64], ev: &Evaluation, lambda: &[f64]) -> Option<Cut> {
        let g = self.gram(lambda);
        let value: f64 = lambda.iter().zip(&ev.values).map(|(l, v)| l * v).sum();
        let grad = self.gradient(&ev.sigma, &g);
        if grad.iter().any(|v| !v.is_finite() || v.abs() > 1e8) {
            return None;
        }
        let mut rhs = value - grad.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        rhs -= 1e-10 * (1.0 + rhs.abs() + value.abs());
        let coeffs = grad.iter().enumerate().filter(|(_, &a)| a != 0.0).map(|(i, &a)| (i, -a)).collect();
        Some(Cut { coeffs, rhs })
    }

    pub fn unit_weights(&self, l: usize) -> Vec<f64> {
        let mut lam = vec![0.0; self.k()];
        lam[l] = 1.0;
        lam
    }

    /// Lower bound on `min max_l tr(G_l M(w)^-1)` over `lo <= w <= hi`,
    /// `sum w = budget`, from Frank-Wolfe duality gaps. Stops early once
    /// the bound reaches `cutoff`.
    pub fn frank_wolfe(&self, lo: &[f64], hi: &[f64], budget: usize, iters: usize, cutoff: f64) -> FwOutcome {
        let n = self.n();
        let ones: Vec<usize> = (0..n).filter(|&i| lo[i] >= 1.0).collect();
        let free: Vec<usize> = (0..n).filter(|&i| lo[i] < 1.0 && hi[i] > 0.0).collect();
        let Some(r) = budget.checked_sub(ones.len()) else {
            return FwOutcome::Empty;
        };
        if r > free.len() {
            return FwOutcome::Empty;
        }
        let mut w = vec![0.0; n];
        for &i in &ones {
            w[i] = 1.0;
        }
        if r == 0 || r == free.len() {
            for &i in &free {
                w[i] = if r == 0 { 0.0 } else { 1.0 };
            }
            return match self.evaluate(&w) {
                None => FwOutcome::Empty,
                Some(ev) => {
                    let bound = ev.max();
                    let lambda = self.unit_weights(ev.argmax());
                    FwOutcome::Bound(FwResult { bound, w, lambda, single_point: true })
                }
            };
        }
        for &i in &free {
            w[i] = r as f64 / free.len() as f64;
        }
        let k = self.k();
        let mut lambda = vec![1.0 / k as f64; k];
        let mut best = f64::NEG_INFINITY;
        let mut ev = match self.evaluate(&w) {
            None => return FwOutcome::Empty,
            Some(ev) => ev,
        };
        let mut order: Vec<usize> = free.clone();
        for _ in 0..iters {
            let top = ev.max();
            if k > 1 {
                let eta = 5.0 / top.max(1e-300);
                for (l, v) in lambda.iter_mut().zip(&ev.values) {
                    *l *= (eta * (v - top)).exp();
                }
                let s: f64 = lambda.iter().sum();
                lambda.iter_mut().for_each(|l| *l /= s);
            }
            let g = self.gram(&lambda);
            let value: f64 = lambda.iter().zip(&ev.values).map(|(l, v)| l * v).sum();
            let grad = self.gradient(&ev.sigma, &g);
            order.sort_by(|&a, &b| grad[a].total_cmp(&grad[b]).then(a.cmp(&b)));
            let mut s = vec![0.0; n];
            for &i in &ones {
                s[i] = 1.0;
            }
            for &i in &order[..r] {
                s[i] = 1.0;
            }
            let gap: f64 = free.iter().map(|&i| grad[i] * (s[i] - w[i])).sum();
            best = best.max(value + gap);
            if best >= cutoff || top - best <= 1e-7 * top.abs() {
                break;
            }
            // golden-section search of tr(G M(w + t (s - w))^-1) on [0, 1]
            let m_w = self.s.info(&w);
            let dir = self.s.info(&s) - &m_w;
            let h = |t: f64| -> f64 {
                match inverse_checked(&(&m_w + &dir * t)) {
                    Some(inv) => trace_prod(&g, &inv),
                    None => f64::INFINITY,
                }
            };
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            let (mut a, mut b) = (0.0, 1.0);
            let mut c = b - phi * (b - a);
            let mut d = a + phi * (b - a);
            let (mut fc, mut fd) = (h(c), h(d));
            for _ in 0..GOLDEN_STEPS {
                if fc <= fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - phi * (b - a);
                    fc = h(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + phi * (b - a);
                    fd = h(d);
                }
            }
            let t = 0.5 * (a + b);
            let next: Vec<f64> = w.iter().zip(&s).map(|(wi, si)| wi + t * (si - wi)).collect();
            match self.evaluate(&next) {
                Some(e) => {
                    w = next;
                    ev = e;
                }
                None => break,
            }
        }
        FwOutcome::Bound(FwResult { bound: best, w, lambda, single_point: false })
    }
}
