#![allow(dead_code)]

//! Reference implementations kept independent of the library code paths.

use nalgebra::DMatrix;

/// Row-major dense matrix as nested vectors.
pub type Dense = Vec<Vec<f64>>;

fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ra, ca, rb, cb) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; ca * cb]; ra * rb];
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn eye2() -> Dense {
    vec![vec![1.0, 0.0], vec![0.0, 1.0]]
}

fn pauli(axis: char) -> Dense {
    match axis {
        'x' => vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        'z' => vec![vec![1.0, 0.0], vec![0.0, -1.0]],
        _ => unreachable!(),
    }
}

/// Operator string with `ops` placed on the given sites, site 0 leftmost.
fn embed(ops: &[(usize, char)], n: usize) -> Dense {
    let mut m = vec![vec![1.0]];
    for s in 0..n {
        let local = ops.iter().find(|(i, _)| *i == s).map_or_else(eye2, |(_, a)| pauli(*a));
        m = kron(&m, &local);
    }
    m
}

fn add_scaled(acc: &mut Dense, m: &Dense, c: f64) {
    for (ra, rm) in acc.iter_mut().zip(m) {
        for (x, y) in ra.iter_mut().zip(rm) {
            *x += c * y;
        }
    }
}

/// H = Σ ε/2 σz + Δ/2 σx + Σ J σzσz built from explicit tensor products.
pub fn brute_hamiltonian(eps: &[f64], delta: &[f64], edges: &[(usize, usize, f64)]) -> Dense {
    let n = eps.len();
    let d = 1usize << n;
    let mut h = vec![vec![0.0; d]; d];
    for i in 0..n {
        add_scaled(&mut h, &embed(&[(i, 'z')], n), eps[i] / 2.0);
        add_scaled(&mut h, &embed(&[(i, 'x')], n), delta[i] / 2.0);
    }
    for &(a, b, j) in edges {
        add_scaled(&mut h, &embed(&[(a, 'z'), (b, 'z')], n), j);
    }
    h
}

/// Cyclic Jacobi rotations; returns sorted eigenvalues.
pub fn jacobi_eigenvalues(m: &Dense) -> Vec<f64> {
    let n = m.len();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

pub fn to_dense(m: &DMatrix<f64>) -> Dense {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Free-fermion solution of the open chain at ε = 0 with nearest-neighbour
/// couplings `j[i]` between sites i and i+1.
pub struct FreeFermion {
    /// ⟨i γ_a γ_b⟩ over the 2N Majoranas.
    gamma: DMatrix<f64>,
    pub ground_energy: f64,
}

impl FreeFermion {
    pub fn new(delta: &[f64], j: &[f64]) -> Self {
        let n = delta.len();
        let m = 2 * n;
        let mut a = DMatrix::<f64>::zeros(m, m);
        for i in 0..n {
            a[(2 * i, 2 * i + 1)] = delta[i];
            a[(2 * i + 1, 2 * i)] = -delta[i];
        }
        for (i, &ji) in j.iter().enumerate() {
            a[(2 * i + 1, 2 * i + 2)] = 2.0 * ji;
            a[(2 * i + 2, 2 * i + 1)] = -2.0 * ji;
        }
        let svd = a.clone().svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let gamma = -(u * vt);
        // Σ A_ab ⟨iγ_aγ_b⟩ / 4
        let e = (0..m).flat_map(|p| (0..m).map(move |q| (p, q))).map(|(p, q)| a[(p, q)] * gamma[(p, q)]).sum::<f64>() / 4.0;
        Self { gamma, ground_energy: e }
    }

    /// ⟨σz_a σz_b⟩ as the Pfaffian of the Majorana string covariance.
    pub fn zz(&self, a: usize, b: usize) -> f64 {
        let (a, b) = (a.min(b), a.max(b));
        if a == b {
            return 1.0;
        }
        let idx: Vec<usize> = (2 * a + 1..=2 * b).collect();
        let k = idx.len();
        let sub = DMatrix::from_fn(k, k, |r, c| if r == c { 0.0 } else { self.gamma[(idx[r], idx[c])] });
        pfaffian(sub)
    }
}

/// Pfaffian of a real antisymmetric matrix by pivoted elimination.
pub fn pfaffian(mut m: DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n % 2 == 1 {
        return 0.0;
    }
    let mut pf = 1.0;
    let mut k = 0;
    while k < n {
        let (mut piv, mut best) = (k + 1, 0.0);
        for r in k + 1..n {
            if m[(r, k)].abs() > best {
                best = m[(r, k)].abs();
                piv = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != k + 1 {
            m.swap_rows(k + 1, piv);
            m.swap_columns(k + 1, piv);
            pf = -pf;
        }
        let akk1 = m[(k, k + 1)];
        pf *= akk1;
        for r in k + 2..n {
            let tau = m[(k, r)] / akk1;
            for c in 0..n {
                let v = m[(k + 1, c)];
                m[(r, c)] -= tau * v;
            }
            for c in 0..n {
                let v = m[(c, k + 1)];
                m[(c, r)] -= tau * v;
            }
        }
        k += 2;
    }
    pf
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
