//! Product of a nonnegative orthant and second-order cones, with the
//! Jordan-algebra operations and Nesterov-Todd scaling used by the solver.

use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ConeLayout {
    pub nonneg: usize,
    pub soc_dims: Vec<usize>,
    pub soc_offsets: Vec<usize>,
    pub dim: usize,
}

impl ConeLayout {
    pub fn new(nonneg: usize, soc_dims: Vec<usize>) -> Self {
        let mut soc_offsets = Vec::with_capacity(soc_dims.len());
        let mut off = nonneg;
        for &d in &soc_dims {
            soc_offsets.push(off);
            off += d;
        }
        Self {
            nonneg,
            soc_dims,
            soc_offsets,
            dim: off,
        }
    }

    /// Barrier degree: one per orthant coordinate and one per cone.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc_dims.len()
    }

    pub fn soc_range(&self, k: usize) -> std::ops::Range<usize> {
        self.soc_offsets[k]..self.soc_offsets[k] + self.soc_dims[k]
    }

    pub fn identity<T: Scalar>(&self) -> Vec<T> {
        let mut e = vec![T::zero(); self.dim];
        e[..self.nonneg].iter_mut().for_each(|v| *v = T::one());
        for &o in &self.soc_offsets {
            e[o] = T::one();
        }
        e
    }

    /// Smallest "eigenvalue": min over orthant entries and `x0 − ‖x1‖` per cone.
    pub fn margin<T: Scalar>(&self, x: &[T]) -> T {
        let mut m = T::infinity();
        for &v in &x[..self.nonneg] {
            m = m.min(v);
        }
        for k in 0..self.soc_dims.len() {
            let b = &x[self.soc_range(k)];
            m = m.min(b[0] - norm2(&b[1..]));
        }
        m
    }

    pub fn product<T: Scalar>(&self, u: &[T], v: &[T], out: &mut [T]) {
        for i in 0..self.nonneg {
            out[i] = u[i] * v[i];
        }
        for k in 0..self.soc_dims.len() {
            let r = self.soc_range(k);
            let (a, b) = (&u[r.clone()], &v[r.clone()]);
            let o = &mut out[r];
            o[0] = dot(a, b);
            for i in 1..a.len() {
                o[i] = a[0] * b[i] + b[0] * a[i];
            }
        }
    }

    /// Solves `lambda ∘ out = r`.
    pub fn divide<T: Scalar>(&self, lambda: &[T], r: &[T], out: &mut [T]) {
        for i in 0..self.nonneg {
            out[i] = r[i] / lambda[i];
        }
        for k in 0..self.soc_dims.len() {
            let rg = self.soc_range(k);
            let (l, rr) = (&lambda[rg.clone()], &r[rg.clone()]);
            let o = &mut out[rg];
            let det = l[0] * l[0] - dot(&l[1..], &l[1..]);
            let u0 = (l[0] * rr[0] - dot(&l[1..], &rr[1..])) / det;
            o[0] = u0;
            for i in 1..l.len() {
                o[i] = (rr[i] - u0 * l[i]) / l[0];
            }
        }
    }

    /// Largest `alpha` with `x + alpha·d` in the closed cone (infinite if unbounded).
    pub fn max_step<T: Scalar>(&self, x: &[T], d: &[T]) -> T {
        let mut alpha = T::infinity();
        for i in 0..self.nonneg {
            if d[i] < T::zero() {
                alpha = alpha.min(-x[i] / d[i]);
            }
        }
        for k in 0..self.soc_dims.len() {
            let r = self.soc_range(k);
            alpha = alpha.min(soc_max_step(&x[r.clone()], &d[r]));
        }
        alpha
    }

    /// Shifts `x` along the identity so that its margin is at least `min_margin`.
    pub fn push_inside<T: Scalar>(&self, x: &mut [T], min_margin: T) {
        let m = self.margin(x);
        if m < min_margin {
            let shift = min_margin - m;
            for i in 0..self.nonneg {
                x[i] += shift;
            }
            for &o in &self.soc_offsets {
                x[o] += shift;
            }
        }
    }
}

pub(crate) fn norm2<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

fn soc_max_step<T: Scalar>(x: &[T], d: &[T]) -> T {
    // q(α) = aα² + 2bα + c with c > 0 at an interior x
    let a = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let b = x[0] * d[0] - dot(&x[1..], &d[1..]);
    let c = x[0] * x[0] - dot(&x[1..], &x[1..]);
    let mut alpha = T::infinity();
    if d[0] < T::zero() {
        alpha = -x[0] / d[0];
    }
    let tiny = T::epsilon() * (a.abs() + b.abs() + c.abs());
    if a.abs() <= tiny {
        if b < T::zero() {
            alpha = alpha.min(-c / (T::lit(2.0) * b));
        }
        return alpha.max(T::zero());
    }
    let disc = b * b - a * c;
    if disc < T::zero() {
        return alpha.max(T::zero());
    }
    let s = disc.sqrt();
    let q = -(b + if b >= T::zero() { s } else { -s });
    for root in [q / a, if q != T::zero() { c / q } else { T::infinity() }] {
        if root > T::zero() {
            alpha = alpha.min(root);
        }
    }
    alpha.max(T::zero())
}

/// Nesterov-Todd scaling `W` with `W z = W⁻¹ s = λ`.
#[derive(Debug, Clone)]
pub(crate) struct NtScaling<T> {
    /// orthant part: `sqrt(s/z)`
    d: Vec<T>,
    /// per cone: (β, v) with `W = β(2vvᵀ − J)`
    soc: Vec<(T, Vec<T>)>,
    pub lambda: Vec<T>,
}

impl<T: Scalar> NtScaling<T> {
    pub fn identity(layout: &ConeLayout) -> Self {
        let soc = layout
            .soc_dims
            .iter()
            .map(|&dim| {
                let mut v = vec![T::zero(); dim];
                v[0] = T::one();
                (T::one(), v)
            })
            .collect();
        Self {
            d: vec![T::one(); layout.nonneg],
            soc,
            lambda: layout.identity(),
        }
    }

    pub fn compute(layout: &ConeLayout, s: &[T], z: &[T]) -> Self {
        let d: Vec<T> = (0..layout.nonneg).map(|i| (s[i] / z[i]).sqrt()).collect();
        let two = T::lit(2.0);
        let mut soc = Vec::with_capacity(layout.soc_dims.len());
        for k in 0..layout.soc_dims.len() {
            let r = layout.soc_range(k);
            let (sk, zk) = (&s[r.clone()], &z[r]);
            let sjs = jnorm_sq(sk);
            let zjz = jnorm_sq(zk);
            let beta = (sjs / zjz).sqrt().sqrt();
            let (ns, nz) = (sjs.sqrt(), zjz.sqrt());
            let sb: Vec<T> = sk.iter().map(|&v| v / ns).collect();
            let zb: Vec<T> = zk.iter().map(|&v| v / nz).collect();
            let gamma = ((T::one() + dot(&sb, &zb)) / two).sqrt();
            let mut w: Vec<T> = sb.iter().zip(&zb).map(|(&a, &b)| (a - b) / (two * gamma)).collect();
            w[0] = (sb[0] + zb[0]) / (two * gamma);
            let den = (two * (w[0] + T::one())).sqrt();
            let mut v: Vec<T> = w.iter().map(|&x| x / den).collect();
            v[0] = (w[0] + T::one()) / den;
            soc.push((beta, v));
        }
        let mut out = Self {
            d,
            soc,
            lambda: Vec::new(),
        };
        let mut lambda = vec![T::zero(); layout.dim];
        out.apply(layout, z, &mut lambda);
        out.lambda = lambda;
        out
    }

    /// `out = W x`
    pub fn apply(&self, layout: &ConeLayout, x: &[T], out: &mut [T]) {
        for i in 0..layout.nonneg {
            out[i] = self.d[i] * x[i];
        }
        let two = T::lit(2.0);
        for (k, (beta, v)) in self.soc.iter().enumerate() {
            let r = layout.soc_range(k);
            let xk = &x[r.clone()];
            let vx = dot(v, xk);
            let o = &mut out[r];
            o[0] = *beta * (two * v[0] * vx - xk[0]);
            for i in 1..v.len() {
                o[i] = *beta * (two * v[i] * vx + xk[i]);
            }
        }
    }

    /// `out = W⁻¹ x`, using `W⁻¹ = β⁻¹(2Jv vᵀJ − J)`.
    pub fn apply_inv(&self, layout: &ConeLayout, x: &[T], out: &mut [T]) {
        for i in 0..layout.nonneg {
            out[i] = x[i] / self.d[i];
        }
        let two = T::lit(2.0);
        for (k, (beta, v)) in self.soc.iter().enumerate() {
            let r = layout.soc_range(k);
            let xk = &x[r.clone()];
            let jvx = v[0] * xk[0] - dot(&v[1..], &xk[1..]);
            let o = &mut out[r];
            o[0] = (two * v[0] * jvx - xk[0]) / *beta;
            for i in 1..v.len() {
                o[i] = (-two * v[i] * jvx + xk[i]) / *beta;
            }
        }
    }

    /// Diagonal of `W²` on the orthant.
    pub fn orthant_sq(&self, i: usize) -> T {
        self.d[i] * self.d[i]
    }

    /// Dense `W²` of cone `k`, row-major: `β²(2vvᵀ − J)²`.
    pub fn soc_sq(&self, layout: &ConeLayout, k: usize) -> Vec<T> {
        let dim = layout.soc_dims[k];
        let (beta, v) = &self.soc[k];
        let two = T::lit(2.0);
        let mut w = vec![T::zero(); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                let j = if r == c {
                    if r == 0 {
                        T::one()
                    } else {
                        -T::one()
                    }
                } else {
                    T::zero()
                };
                w[r * dim + c] = two * v[r] * v[c] - j;
            }
        }
        let b2 = *beta * *beta;
        let mut out = vec![T::zero(); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                out[r * dim + c] = b2 * (0..dim).map(|m| w[r * dim + m] * w[m * dim + c]).sum();
            }
        }
        out
    }
}

fn jnorm_sq<T: Scalar>(x: &[T]) -> T {
    let t = norm2(&x[1..]);
    (x[0] - t) * (x[0] + t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn interior(raw: &[f64], extra: f64) -> Vec<f64> {
        let mut v = raw.to_vec();
        v[0] = norm2(&raw[1..]) + extra;
        v
    }

    #[test]
    fn max_step_hits_boundary() {
        let layout = ConeLayout::new(1, vec![3]);
        let x = [2.0f64, 2.0, 0.0, 0.0];
        let d = [-1.0f64, -1.0, 1.0, 0.0];
        let a = layout.max_step(&x, &d);
        // orthant: 2; cone: (2−α)² = α² → α = 1
        assert!((a - 1.0).abs() < 1e-14);
        let mut y = x;
        for i in 0..4 {
            y[i] += a * d[i];
        }
        assert!(layout.margin(&y).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn nt_scaling_identities(
            s in proptest::collection::vec(-1.0f64..1.0, 4),
            z in proptest::collection::vec(-1.0f64..1.0, 4),
            es in 0.05f64..2.0,
            ez in 0.05f64..2.0,
            o in proptest::collection::vec(0.1f64..3.0, 4),
        ) {
            let layout = ConeLayout::new(2, vec![4]);
            let sv: Vec<f64> = [o[0], o[1]].into_iter().chain(interior(&s, es)).collect();
            let zv: Vec<f64> = [o[2], o[3]].into_iter().chain(interior(&z, ez)).collect();
            let w = NtScaling::compute(&layout, &sv, &zv);
            let mut wis = vec![0.0; 6];
            w.apply_inv(&layout, &sv, &mut wis);
            for i in 0..6 {
                prop_assert!((wis[i] - w.lambda[i]).abs() <= 1e-9 * (1.0 + w.lambda[i].abs()));
            }
            let mut back = vec![0.0; 6];
            w.apply(&layout, &wis, &mut back);
            for i in 0..6 {
                prop_assert!((back[i] - sv[i]).abs() <= 1e-9 * (1.0 + sv[i].abs()));
            }
            // lambda ∘ (lambda⁻¹ ∘ r) = r
            let r = [0.3, -0.2, 0.5, 0.1, -0.4, 0.2];
            let mut u = vec![0.0; 6];
            layout.divide(&w.lambda, &r, &mut u);
            let mut rr = vec![0.0; 6];
            layout.product(&w.lambda, &u, &mut rr);
            for i in 0..6 {
                prop_assert!((rr[i] - r[i]).abs() <= 1e-9);
            }
        }
    }
}
