//! Banded LU factorisation with partial pivoting (LAPACK `gbtrf` layout).

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored column
/// by column with room for the fill-in created by row interchanges.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ld,
            data: vec![0.0; ld * n],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.ku + self.kl >= j && i <= j + self.kl);
        self.kl + self.ku + i - j + j * self.ld
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let k = self.idx(i, j);
        self.data[k] += value;
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.idx(i, j);
        self.data[k] = value;
    }

    /// Factorise in place and solve `A x = b`, overwriting `b` with `x`.
    /// Returns `None` on an exactly singular pivot.
    pub fn solve_in_place(mut self, b: &mut [f64]) -> Option<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        assert_eq!(b.len(), n);
        let mut pivots = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = self.get(j, j).abs();
            for r in 1..=km {
                let val = self.get(j + r, j).abs();
                if val > best {
                    best = val;
                    jp = r;
                }
            }
            pivots[j] = j + jp;
            if best == 0.0 {
                return None;
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.get(j, c);
                    let bb = self.get(j + jp, c);
                    self.set(j, c, bb);
                    self.set(j + jp, c, a);
                }
            }
            let pivot = self.get(j, j);
            for r in 1..=km {
                let k = self.idx(j + r, j);
                self.data[k] /= pivot;
            }
            for c in j + 1..=ju {
                let top = self.get(j, c);
                if top != 0.0 {
                    for r in 1..=km {
                        let l = self.get(j + r, j);
                        self.add(j + r, c, -l * top);
                    }
                }
            }
        }
        // forward substitution with the unit lower factor
        for j in 0..n {
            let p = pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            for r in 1..=km {
                b[j + r] -= self.get(j + r, j) * b[j];
            }
        }
        // back substitution, U has kl + ku super-diagonals
        for j in (0..n).rev() {
            b[j] /= self.get(j, j);
            let lo = j.saturating_sub(kl + ku);
            for i in lo..j {
                b[i] -= self.get(i, j) * b[j];
            }
        }
        Some(())
    }
}
