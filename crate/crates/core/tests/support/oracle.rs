//! Brute-force reference for the random-recursive-tree analytics: walks every
//! tree on nodes 0..=N (node m attaches to any of 0..m-1, each shape with
//! probability 1/N!) and counts ancestor relations exactly.

/// `counts[k][n][m]` = number of trees in which n is the level-(k+1)
/// ancestor of m; divide by `shapes` for the probability.
pub struct Enumeration {
    pub size: usize,
    pub levels: usize,
    pub shapes: u64,
    pub counts: Vec<Vec<Vec<u64>>>,
}

impl Enumeration {
    pub fn new(size: usize, levels: usize) -> Self {
        let mut e = Enumeration {
            size,
            levels,
            shapes: 0,
            counts: vec![vec![vec![0; size + 1]; size + 1]; levels],
        };
        let mut parent = vec![usize::MAX; size + 1];
        e.walk(1, &mut parent);
        e
    }

    fn walk(&mut self, m: usize, parent: &mut Vec<usize>) {
        if m > self.size {
            self.shapes += 1;
            for node in 1..=self.size {
                let mut cur = node;
                for k in 0..self.levels {
                    if cur == 0 {
                        break;
                    }
                    cur = parent[cur];
                    self.counts[k][cur][node] += 1;
                }
            }
            return;
        }
        for p in 0..m {
            parent[m] = p;
            self.walk(m + 1, parent);
        }
    }

    pub fn prob(&self, n: usize, m: usize, k: usize) -> f64 {
        self.counts[k - 1][n][m] as f64 / self.shapes as f64
    }

    /// Expected level-reward income of trader n (originator earns none).
    /// `alphas[k]` is the share of level k+1 and `price(m)` the price paid by
    /// entrant m.
    pub fn revenue(&self, n: usize, alphas: &[f64], price: impl Fn(usize) -> f64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let mut total = 0.0;
        for m in n + 1..=self.size {
            for (k, alpha) in alphas.iter().enumerate().take(self.levels) {
                total += self.counts[k][n][m] as f64 * alpha * price(m);
            }
        }
        total / self.shapes as f64
    }
}
