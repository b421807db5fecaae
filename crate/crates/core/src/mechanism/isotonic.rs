use crate::linalg::DenseVector;

/// L2 projection onto nondecreasing vectors (pool adjacent violators).
pub fn isotonic_postprocess(noisy_prefix: &[f64]) -> DenseVector {
    // Blocks of (sum, count), merged while their means decrease.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(noisy_prefix.len());
    for &v in noisy_prefix {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s2, n2) = blocks[blocks.len() - 1];
            let (s1, n1) = blocks[blocks.len() - 2];
            if s1 / n1 as f64 <= s2 / n2 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().expect("two blocks") = (s1 + s2, n1 + n2);
        }
    }
    let out = blocks.into_iter().flat_map(|(s, n)| std::iter::repeat_n(s / n as f64, n)).collect();
    DenseVector::new(out).expect("means of finite values")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        assert_eq!(isotonic_postprocess(&[1.0, 2.0, 3.0]).as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(isotonic_postprocess(&[3.0, 1.0, 2.0]).as_slice(), &[2.0, 2.0, 2.0]);
        assert_eq!(isotonic_postprocess(&[5.0, 5.0, 0.0, 0.0]).as_slice(), &[2.5; 4]);
        assert_eq!(isotonic_postprocess(&[1.0, 3.0, 2.0, 4.0]).as_slice(), &[1.0, 2.5, 2.5, 4.0]);
        assert!(isotonic_postprocess(&[]).is_empty());
    }
}
