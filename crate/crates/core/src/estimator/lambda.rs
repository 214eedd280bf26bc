//! Integer least squares: LAMBDA decorrelation (integer Gauss transforms and
//! symmetric permutations on an `L^T D L` factorization) followed by a
//! depth-first Schnorr-Euchner enumeration with a shrinking radius.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Unimodular change of basis `z' = T^T z` with `Q' = T^T Q T = L^T D L`.
#[derive(Debug, Clone)]
pub struct Decorrelation {
    pub transform: DMatrix<i64>,
    pub inverse: DMatrix<i64>,
    pub q_reduced: DMatrix<f64>,
    /// Unit lower-triangular factor of `q_reduced`.
    pub l: DMatrix<f64>,
    /// Conditional variances.
    pub d: DVector<f64>,
}

impl Decorrelation {
    pub fn to_reduced(&self, z: &DVector<f64>) -> DVector<f64> {
        self.transform.map(|v| v as f64).transpose() * z
    }

    /// Maps a reduced-space integer vector back: `z = T^-T z'`.
    pub fn from_reduced(&self, z: &DVector<i64>) -> DVector<i64> {
        self.inverse.transpose() * z
    }
}

/// `Q = L^T diag(D) L` with `L` unit lower triangular, factored from the
/// last row upward.
pub fn ltdl(q: &DMatrix<f64>) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let n = q.nrows();
    let mut a = (q + q.transpose()) * 0.5;
    let mut l = DMatrix::zeros(n, n);
    let mut d = DVector::zeros(n);
    for i in (0..n).rev() {
        d[i] = a[(i, i)];
        if !(d[i] > 0.0) {
            return None;
        }
        let s = d[i].sqrt();
        for j in 0..=i {
            l[(i, j)] = a[(i, j)] / s;
        }
        for j in 0..i {
            for k in 0..=j {
                a[(j, k)] -= l[(i, k)] * l[(i, j)];
            }
        }
        let lii = l[(i, i)];
        for j in 0..=i {
            l[(i, j)] /= lii;
        }
    }
    Some((l, d))
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

fn sgn(x: f64) -> f64 {
    if x <= 0.0 { -1.0 } else { 1.0 }
}

struct Reducer {
    n: usize,
    l: DMatrix<f64>,
    d: DVector<f64>,
    t: DMatrix<i64>,
    t_inv: DMatrix<i64>,
}

impl Reducer {
    fn gauss(&mut self, i: usize, j: usize) {
        let mu = round_half_up(self.l[(i, j)]);
        if mu == 0.0 {
            return;
        }
        for k in i..self.n {
            self.l[(k, j)] -= mu * self.l[(k, i)];
        }
        let mu_i = mu as i64;
        for k in 0..self.n {
            self.t[(k, j)] -= mu_i * self.t[(k, i)];
        }
        for k in 0..self.n {
            self.t_inv[(i, k)] += mu_i * self.t_inv[(j, k)];
        }
    }

    fn permute(&mut self, j: usize, del: f64) {
        let (l, d) = (&mut self.l, &mut self.d);
        let eta = d[j] / del;
        let lam = d[j + 1] * l[(j + 1, j)] / del;
        d[j] = eta * d[j + 1];
        d[j + 1] = del;
        for k in 0..j {
            let a0 = l[(j, k)];
            let a1 = l[(j + 1, k)];
            l[(j, k)] = -l[(j + 1, j)] * a0 + a1;
            l[(j + 1, k)] = eta * a0 + lam * a1;
        }
        l[(j + 1, j)] = lam;
        for k in j + 2..self.n {
            l.swap((k, j), (k, j + 1));
        }
        self.t.swap_columns(j, j + 1);
        self.t_inv.swap_rows(j, j + 1);
    }

    fn run(&mut self) {
        if self.n < 2 {
            return;
        }
        let mut j = self.n as isize - 2;
        let mut k = self.n as isize - 2;
        while j >= 0 {
            let ju = j as usize;
            if j <= k {
                for i in ju + 1..self.n {
                    self.gauss(i, ju);
                }
            }
            let del = self.d[ju] + self.l[(ju + 1, ju)].powi(2) * self.d[ju + 1];
            if del + 1e-6 < self.d[ju + 1] {
                self.permute(ju, del);
                k = j;
                j = self.n as isize - 2;
            } else {
                j -= 1;
            }
        }
    }
}

/// Decorrelates an ambiguity covariance with integer Gauss transforms and
/// permutations until every conditional correlation is at most one half.
pub fn decorrelate(q: &DMatrix<f64>) -> Result<Decorrelation> {
    let n = q.nrows();
    let (l, d) = ltdl(q).ok_or_else(|| Error::CovarianceNotSpd("ambiguity covariance".into()))?;
    let mut red = Reducer {
        n,
        l,
        d,
        t: DMatrix::identity(n, n),
        t_inv: DMatrix::identity(n, n),
    };
    red.run();
    let tf = red.t.map(|v| v as f64);
    let q_reduced = tf.transpose() * q * &tf;
    let q_reduced = (&q_reduced + q_reduced.transpose()) * 0.5;
    Ok(Decorrelation { transform: red.t, inverse: red.t_inv, q_reduced, l: red.l, d: red.d })
}

/// Integer vector with its squared distance to the float solution in the
/// inverse-covariance metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub z: DVector<i64>,
    pub distance: f64,
}

#[derive(PartialEq)]
struct Leaf {
    distance: f64,
    z: Vec<i64>,
}

impl Eq for Leaf {}

impl PartialOrd for Leaf {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Leaf {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance.total_cmp(&other.distance).then_with(|| self.z.cmp(&other.z))
    }
}

/// Enumerates the `count` best integer vectors of the reduced problem.
fn search(l: &DMatrix<f64>, d: &DVector<f64>, zs: &DVector<f64>, count: usize) -> Vec<Leaf> {
    let n = zs.len();
    let mut s = DMatrix::<f64>::zeros(n + 1, n);
    let mut dist = vec![0.0; n];
    let mut zb = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut step = vec![0.0; n];
    let mut heap: BinaryHeap<Leaf> = BinaryHeap::with_capacity(count + 1);
    let mut maxdist = f64::INFINITY;

    let mut k = n - 1;
    zb[k] = zs[k];
    z[k] = round_half_up(zb[k]);
    let mut y = zb[k] - z[k];
    step[k] = sgn(y);
    loop {
        let newdist = dist[k] + y * y / d[k];
        if newdist < maxdist {
            if k != 0 {
                k -= 1;
                dist[k] = newdist;
                for i in 0..=k {
                    s[(k, i)] = s[(k + 1, i)] + (z[k + 1] - zb[k + 1]) * l[(k + 1, i)];
                }
                zb[k] = zs[k] + s[(k, k)];
                z[k] = round_half_up(zb[k]);
                y = zb[k] - z[k];
                step[k] = sgn(y);
            } else {
                let leaf = Leaf { distance: newdist, z: z.iter().map(|&v| v as i64).collect() };
                if heap.len() < count {
                    heap.push(leaf);
                } else if leaf < *heap.peek().expect("non-empty") {
                    heap.pop();
                    heap.push(leaf);
                }
                if heap.len() == count {
                    maxdist = heap.peek().expect("non-empty").distance;
                }
                z[0] += step[0];
                y = zb[0] - z[0];
                step[0] = -step[0] - sgn(step[0]);
            }
        } else {
            if k == n - 1 {
                break;
            }
            k += 1;
            z[k] += step[k];
            y = zb[k] - z[k];
            step[k] = -step[k] - sgn(step[k]);
        }
    }
    heap.into_sorted_vec()
}

/// Reusable integer least-squares searcher for one float solution.
#[derive(Debug, Clone)]
pub struct IlsSearch {
    decorrelation: Decorrelation,
    z_reduced: DVector<f64>,
}

impl IlsSearch {
    pub fn new(z_float: &DVector<f64>, q: &DMatrix<f64>) -> Result<Self> {
        if z_float.len() != q.nrows() || q.nrows() != q.ncols() || q.nrows() == 0 {
            return Err(Error::Model("ambiguity vector and covariance dimensions differ".into()));
        }
        let decorrelation = decorrelate(q)?;
        let z_reduced = decorrelation.to_reduced(z_float);
        Ok(IlsSearch { decorrelation, z_reduced })
    }

    pub fn decorrelation(&self) -> &Decorrelation {
        &self.decorrelation
    }

    /// The `count` integer vectors closest to the float solution, ascending.
    pub fn enumerate(&self, count: usize) -> Vec<Candidate> {
        if count == 0 {
            return Vec::new();
        }
        let dec = &self.decorrelation;
        search(&dec.l, &dec.d, &self.z_reduced, count)
            .into_iter()
            .map(|leaf| Candidate {
                z: dec.from_reduced(&DVector::from_vec(leaf.z)),
                distance: leaf.distance,
            })
            .collect()
    }
}

pub fn ils_enumerate(z_float: &DVector<f64>, q: &DMatrix<f64>, count: usize) -> Result<Vec<Candidate>> {
    Ok(IlsSearch::new(z_float, q)?.enumerate(count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn int_det(m: &DMatrix<i64>) -> i128 {
        // Bareiss fraction-free elimination.
        let n = m.nrows();
        let mut a: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)] as i128).collect()).collect();
        let mut sign = 1;
        let mut prev = 1i128;
        for k in 0..n {
            if a[k][k] == 0 {
                let Some(p) = (k + 1..n).find(|&r| a[r][k] != 0) else { return 0 };
                a.swap(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
                }
            }
            prev = a[k][k];
        }
        sign * a[n - 1][n - 1]
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.01
    }

    #[test]
    fn ltdl_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_spd(5, &mut rng);
        let (l, d) = ltdl(&q).unwrap();
        let back = l.transpose() * DMatrix::from_diagonal(&d) * &l;
        assert!((back - &q).amax() < 1e-12);
        for i in 0..5 {
            assert_eq!(l[(i, i)], 1.0);
            for j in i + 1..5 {
                assert_eq!(l[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn diagonal_covariance_needs_no_gauss_transform() {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 2.0, 1.0]));
        let dec = decorrelate(&q).unwrap();
        // Only a permutation is allowed.
        for col in dec.transform.column_iter() {
            assert_eq!(col.iter().filter(|&&v| v != 0).count(), 1);
            assert_eq!(col.iter().map(|v| v.abs()).sum::<i64>(), 1);
        }
    }

    #[test]
    fn two_by_two_correlation_is_reduced() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
        let dec = decorrelate(&q).unwrap();
        let qr = &dec.q_reduced;
        let rho = qr[(0, 1)] / (qr[(0, 0)] * qr[(1, 1)]).sqrt();
        assert!(dec.l[(1, 0)].abs() <= 0.5);
        assert!(rho.abs() <= 0.5, "rho = {rho}");
    }

    #[test]
    fn transform_is_unimodular_and_congruent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=8 {
            for _ in 0..10 {
                let q = random_spd(n, &mut rng) * 10.0;
                let dec = decorrelate(&q).unwrap();
                assert_eq!(int_det(&dec.transform).abs(), 1);
                assert_eq!(&dec.transform * &dec.inverse, DMatrix::identity(n, n));
                let rel = (dec.q_reduced.determinant() - q.determinant()).abs() / q.determinant();
                assert!(rel < 1e-9, "n={n} rel={rel}");
                for i in 0..n {
                    for j in 0..i {
                        assert!(dec.l[(i, j)].abs() <= 0.5 + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn isotropic_two_dim_order() {
        let q = DMatrix::identity(2, 2);
        let zf = DVector::from_vec(vec![0.2, -0.3]);
        let c = ils_enumerate(&zf, &q, 3).unwrap();
        let got: Vec<Vec<i64>> = c.iter().map(|c| c.z.iter().copied().collect()).collect();
        assert_eq!(got, vec![vec![0, 0], vec![0, -1], vec![1, 0]]);
        let d: Vec<f64> = c.iter().map(|c| c.distance).collect();
        for (got, want) in d.iter().zip([0.13, 0.53, 0.73]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn integral_float_is_its_own_best_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_spd(4, &mut rng);
        let zf = DVector::from_vec(vec![3.0, -7.0, 12.0, 0.0]);
        let c = ils_enumerate(&zf, &q, 1).unwrap();
        assert_eq!(c[0].z, zf.map(|v| v as i64));
        assert!(c[0].distance.abs() < 1e-12);
    }
}
