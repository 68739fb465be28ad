/// Binomial coefficient `C(n, k)`, or `None` when it does not fit in a `u64`.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        // c * (n - i) is divisible by (i + 1) at every step.
        c = c.checked_mul((n - i) as u128)? / (i as u128 + 1);
        if c > u64::MAX as u128 {
            return None;
        }
    }
    Some(c as u64)
}

/// Lexicographic enumeration of the `k`-subsets of `0..n`.
///
/// Each item is the ascending index list of one subset; the first item is
/// `[0, 1, .., k - 1]`.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    current: Vec<usize>,
    started: bool,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            current: (0..k).collect(),
            started: false,
            done: k > n,
        }
    }

    /// Advances to the next subset and returns it, lending the internal buffer.
    pub fn next_subset(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.current);
        }
        let k = self.current.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.current[i] < self.n - k + i {
                self.current[i] += 1;
                for j in i + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                return Some(&self.current);
            }
        }
        self.done = true;
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2), Some(6));
        assert_eq!(binomial(10, 5), Some(252));
        assert_eq!(binomial(16, 8), Some(12870));
        assert_eq!(binomial(5, 0), Some(1));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(60, 30), Some(118264581564861424));
        assert_eq!(binomial(100, 50), None);
    }

    #[test]
    fn binomial_overflow_is_none() {
        assert_eq!(binomial(200, 100), None);
    }

    #[test]
    fn enumerates_all_subsets_in_order() {
        let mut c = Combinations::new(4, 2);
        let mut seen = Vec::new();
        while let Some(s) = c.next_subset() {
            seen.push(s.to_vec());
        }
        assert_eq!(
            seen,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
    }

    #[test]
    fn count_matches_binomial() {
        for n in 0..9 {
            for k in 0..=n {
                let mut c = Combinations::new(n, k);
                let mut count = 0u64;
                while c.next_subset().is_some() {
                    count += 1;
                }
                assert_eq!(Some(count), binomial(n as u64, k as u64), "n={n} k={k}");
            }
        }
    }
}
