//! Truncated univariate Taylor arithmetic: coefficient vectors c[k] of (x − x0)^k.

#[derive(Clone, Debug, PartialEq)]
pub struct Taylor1(pub Vec<f64>);

impl Taylor1 {
    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Taylor1(c)
    }

    pub fn variable(x0: f64, order: usize) -> Self {
        let mut c = Taylor1::constant(x0, order);
        if order >= 1 {
            c.0[1] = 1.0;
        }
        c
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn add(&self, o: &Self) -> Self {
        Taylor1(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        Taylor1(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> Self {
        Taylor1(self.0.iter().map(|a| -a).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.0.len();
        Taylor1((0..n).map(|k| (0..=k).map(|i| self.0[i] * o.0[k - i]).sum()).collect())
    }

    pub fn div(&self, o: &Self) -> Self {
        let n = self.0.len();
        let mut c = vec![0.0; n];
        for k in 0..n {
            let s: f64 = (1..=k).map(|i| o.0[i] * c[k - i]).sum();
            c[k] = (self.0[k] - s) / o.0[0];
        }
        Taylor1(c)
    }

    pub fn exp(&self) -> Self {
        let n = self.0.len();
        let mut e = vec![0.0; n];
        e[0] = self.0[0].exp();
        for k in 1..n {
            e[k] = (1..=k).map(|j| j as f64 * self.0[j] * e[k - j]).sum::<f64>() / k as f64;
        }
        Taylor1(e)
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let n = self.0.len();
        let (mut s, mut c) = (vec![0.0; n], vec![0.0; n]);
        (s[0], c[0]) = self.0[0].sin_cos();
        for k in 1..n {
            let mut ds = 0.0;
            let mut dc = 0.0;
            for j in 1..=k {
                let w = j as f64 * self.0[j];
                ds += w * c[k - j];
                dc -= w * s[k - j];
            }
            s[k] = ds / k as f64;
            c[k] = dc / k as f64;
        }
        (Taylor1(s), Taylor1(c))
    }

    /// Horner evaluation at offset dx.
    pub fn eval(&self, dx: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * dx + c)
    }

    /// k-th derivative at the centre.
    pub fn derivative(&self, k: usize) -> f64 {
        let f: f64 = (1..=k).map(|i| i as f64).product();
        self.0.get(k).copied().unwrap_or(0.0) * f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_sin_cos_coefficients() {
        let x = Taylor1::variable(0.0, 6);
        let e = x.exp();
        let mut f = 1.0;
        for k in 0..=6 {
            assert!((e.0[k] - 1.0 / f).abs() < 1e-15);
            f *= (k + 1) as f64;
        }
        let (s, c) = x.sin_cos();
        assert_eq!((s.0[1], c.0[0]), (1.0, 1.0));
        assert!((s.0[3] + 1.0 / 6.0).abs() < 1e-16 && (c.0[4] - 1.0 / 24.0).abs() < 1e-16);
    }

    #[test]
    fn division_inverts_product() {
        let a = Taylor1(vec![1.0, 2.0, -0.5, 0.3, 0.0]);
        let b = Taylor1(vec![2.0, -1.0, 0.25, 0.0, 1.0]);
        let back = a.mul(&b).div(&b);
        for (x, y) in back.0.iter().zip(&a.0) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
