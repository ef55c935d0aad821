//! Pointwise tensors whose components are jets, stored densely with
//! contravariant slots first.

use crate::fields::field::{sym_index, Valence};
use crate::fields::jet::{Jet, MAXN};

#[derive(Clone, Debug)]
pub struct JT {
    pub n: usize,
    pub val: Valence,
    pub c: Vec<Jet>,
}

/// The partial derivative `d_k` of a jet, one order lower.
#[inline]
pub fn dshift(j: &Jet, k: usize) -> Jet {
    Jet { v: j.d[k], d: j.dd[k], dd: [[f64::NAN; MAXN]; MAXN] }
}

/// Second partial derivative value `d_a d_b` as a value-only jet.
#[inline]
pub fn ddshift(j: &Jet, a: usize, b: usize) -> Jet {
    let mut out = Jet::nan();
    out.v = j.dd[a][b];
    out
}

impl JT {
    pub fn zeros(n: usize, val: Valence) -> JT {
        JT { n, val, c: vec![Jet::constant(0.0); n.pow(val.rank() as u32)] }
    }

    pub fn rank(&self) -> usize {
        self.val.rank()
    }

    #[inline]
    pub fn lin(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    #[inline]
    pub fn at(&self, idx: &[usize]) -> &Jet {
        &self.c[self.lin(idx)]
    }

    #[inline]
    pub fn at_mut(&mut self, idx: &[usize]) -> &mut Jet {
        let l = self.lin(idx);
        &mut self.c[l]
    }

    /// Multi-index of a dense linear position.
    pub fn multi(&self, mut lin: usize) -> [usize; 6] {
        let r = self.rank();
        let mut m = [0; 6];
        for s in (0..r).rev() {
            m[s] = lin % self.n;
            lin /= self.n;
        }
        m
    }

    /// Expands stored components (upper-triangular for symmetric rank 2).
    pub fn from_stored(n: usize, val: Valence, symmetric: bool, stored: &[Jet]) -> JT {
        if symmetric && val.rank() == 2 {
            let mut t = JT::zeros(n, val);
            for i in 0..n {
                for j in 0..n {
                    t.c[i * n + j] = stored[sym_index(i, j, n)];
                }
            }
            t
        } else {
            JT { n, val, c: stored.to_vec() }
        }
    }

    /// Stored component values (upper triangle when `symmetric`).
    pub fn stored_values(&self, symmetric: bool) -> Vec<f64> {
        let n = self.n;
        if symmetric && self.rank() == 2 {
            let mut out = Vec::with_capacity(n * (n + 1) / 2);
            for i in 0..n {
                for j in i..n {
                    out.push(self.c[i * n + j].v);
                }
            }
            out
        } else {
            self.c.iter().map(|j| j.v).collect()
        }
    }

    pub fn scale(&self, s: f64) -> JT {
        JT { n: self.n, val: self.val, c: self.c.iter().map(|j| j.scale(s)).collect() }
    }

    pub fn add(&self, o: &JT) -> JT {
        JT { n: self.n, val: self.val, c: self.c.iter().zip(&o.c).map(|(a, b)| *a + *b).collect() }
    }
}

/// Square jet matrix with fixed capacity.
pub type JMat = [[Jet; MAXN]; MAXN];

pub fn jmat_zero() -> JMat {
    [[Jet::constant(0.0); MAXN]; MAXN]
}

/// Rank-2 dense tensor to a matrix.
pub fn to_mat(t: &JT) -> JMat {
    let n = t.n;
    let mut m = jmat_zero();
    for i in 0..n {
        for j in 0..n {
            m[i][j] = t.c[i * n + j];
        }
    }
    m
}

pub fn from_mat(n: usize, val: Valence, m: &JMat) -> JT {
    let mut t = JT::zeros(n, val);
    for i in 0..n {
        for j in 0..n {
            t.c[i * n + j] = m[i][j];
        }
    }
    t
}

/// `v^i -> g_ij v^j` or `w_i -> g^ij w_j` for a given matrix.
pub fn mat_vec(n: usize, m: &JMat, v: &[Jet]) -> Vec<Jet> {
    (0..n)
        .map(|i| {
            let mut s = Jet::constant(0.0);
            for j in 0..n {
                s += m[i][j] * v[j];
            }
            s
        })
        .collect()
}

/// `A T B^T` for rank-2 component matrices; used to raise or lower both slots.
pub fn sandwich(n: usize, a: &JMat, t: &JMat) -> JMat {
    let mut tmp = jmat_zero();
    for i in 0..n {
        for l in 0..n {
            let mut s = Jet::constant(0.0);
            for k in 0..n {
                s += a[i][k] * t[k][l];
            }
            tmp[i][l] = s;
        }
    }
    let mut out = jmat_zero();
    for i in 0..n {
        for j in 0..n {
            let mut s = Jet::constant(0.0);
            for l in 0..n {
                s += tmp[i][l] * a[j][l];
            }
            out[i][j] = s;
        }
    }
    out
}

/// Full contraction `sum_ij a_ij b_ij`.
pub fn mat_dot(n: usize, a: &JMat, b: &JMat) -> Jet {
    let mut s = Jet::constant(0.0);
    for i in 0..n {
        for j in 0..n {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

/// Matrix product `a b`.
pub fn mat_mul(n: usize, a: &JMat, b: &JMat) -> JMat {
    let mut out = jmat_zero();
    for i in 0..n {
        for j in 0..n {
            let mut s = Jet::constant(0.0);
            for k in 0..n {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

/// Trace `sum_ij m_ij a_ij` against a metric-like matrix.
pub fn trace_with(n: usize, m: &JMat, a: &JMat) -> Jet {
    mat_dot(n, m, a)
}
