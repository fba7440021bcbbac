/// Ground truth for diagonal instances, computed with scalar loops only.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    /// `{i : max_{r ≤ n} S_r(a)_i > λ ρ_i}`.
    pub exceptional: Vec<bool>,
    /// Indicator of the complement, i.e. the diagonal of `e_n`.
    pub indicator: Vec<f64>,
    /// `Σ_{i exceptional} ρ_i`.
    pub mass: f64,
    /// `Σ_i max(0, max_r (r+1)(S_r(a)_i − λ ρ_i))`.
    pub optimum: f64,
    /// `S_r(a)_i` for `r = 0..=n`.
    pub averages: Vec<Vec<f64>>,
}

/// Classical maximal set for `a`, density `rho`, and a kernel `P` acting by
/// `(T x)_i = Σ_j P_ij x_j` (the identity when `kernel` is `None`).
///
/// On densities the extended map is `(T₁ a)_i = ρ_i Σ_j P_ij a_j / ρ_j`.
pub fn commutative_oracle(a: &[f64], rho: &[f64], kernel: Option<&[Vec<f64>]>, lambda: f64, n: usize) -> OracleResult {
    let len = a.len();
    assert_eq!(rho.len(), len, "density and input lengths differ");
    let step = |v: &[f64]| -> Vec<f64> {
        match kernel {
            None => v.to_vec(),
            Some(p) => (0..len)
                .map(|i| {
                    let mut acc = 0.0;
                    for j in 0..len {
                        acc += p[i][j] * v[j] / rho[j];
                    }
                    rho[i] * acc
                })
                .collect(),
        }
    };
    let mut averages = Vec::with_capacity(n + 1);
    let mut power = a.to_vec();
    let mut sum = a.to_vec();
    averages.push(a.to_vec());
    for r in 1..=n {
        power = step(&power);
        for i in 0..len {
            sum[i] += power[i];
        }
        averages.push(sum.iter().map(|s| s / (r as f64 + 1.0)).collect());
    }
    let mut exceptional = vec![false; len];
    let mut optimum = 0.0;
    for i in 0..len {
        let mut best: f64 = 0.0;
        for (r, avg) in averages.iter().enumerate() {
            if avg[i] > lambda * rho[i] {
                exceptional[i] = true;
            }
            best = best.max((r as f64 + 1.0) * (avg[i] - lambda * rho[i]));
        }
        optimum += best;
    }
    let mass = (0..len).filter(|&i| exceptional[i]).map(|i| rho[i]).sum();
    let indicator = exceptional.iter().map(|&x| if x { 0.0 } else { 1.0 }).collect();
    OracleResult { exceptional, indicator, mass, optimum, averages }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_below_threshold_has_empty_set() {
        let rho = [0.2, 0.3, 0.5];
        let res = commutative_oracle(&rho, &rho, None, 2.0, 4);
        assert!(res.exceptional.iter().all(|&x| !x));
        assert_eq!(res.indicator, vec![1.0; 3]);
        assert_eq!(res.optimum, 0.0);
    }

    #[test]
    fn single_spike() {
        let res = commutative_oracle(&[1.0, 0.0], &[0.5, 0.5], None, 1.0, 0);
        assert_eq!(res.exceptional, vec![true, false]);
        assert_eq!(res.mass, 0.5);
        assert!(res.mass <= 2.0 / 1.0 * 1.0);
        assert_eq!(res.optimum, 0.5);
    }

    #[test]
    fn kernel_moves_mass() {
        // swap chain: the spike alternates, so the average at the empty site rises
        let p = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let res = commutative_oracle(&[1.0, 0.0], &[0.5, 0.5], Some(&p), 0.8, 1);
        assert_eq!(res.averages[1], vec![0.5, 0.5]);
        assert_eq!(res.exceptional, vec![true, true]);
    }
}
