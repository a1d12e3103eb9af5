//! Euclidean projection onto nondecreasing sequences (pool adjacent violators),
//! optionally intersected with a box.

/// Replaces `y` by its least-squares projection onto `{z : z_0 <= ... <= z_{n-1}}`.
pub fn project_monotone(y: &mut [f64]) {
    // Blocks of pooled values: (mean, count).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y.iter() {
        let mut cur = (v, 1usize);
        while let Some(&(m, k)) = blocks.last() {
            if m <= cur.0 {
                break;
            }
            blocks.pop();
            let n = k + cur.1;
            cur = ((m * k as f64 + cur.0 * cur.1 as f64) / n as f64, n);
        }
        blocks.push(cur);
    }
    let mut i = 0;
    for (m, k) in blocks {
        y[i..i + k].iter_mut().for_each(|v| *v = m);
        i += k;
    }
}

/// Projection onto nondecreasing sequences with values in `[lo, hi]`.
///
/// Clipping the isotonic fit is exact: clamping is monotone, so it keeps the
/// order, and within each pooled block the constrained optimum is the clamped
/// block mean.
pub fn project_monotone_box(y: &mut [f64], lo: f64, hi: f64) {
    project_monotone(y);
    y.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_input_is_fixed() {
        let mut y = vec![0.0, 1.0, 1.0, 3.0];
        project_monotone(&mut y);
        assert_eq!(y, vec![0.0, 1.0, 1.0, 3.0]);
    }

    #[test]
    fn pools_violators() {
        let mut y = vec![1.0, 3.0, 2.0, 4.0];
        project_monotone(&mut y);
        assert_eq!(y, vec![1.0, 2.5, 2.5, 4.0]);

        let mut y = vec![3.0, 2.0, 1.0];
        project_monotone(&mut y);
        assert_eq!(y, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn box_clips_after_pooling() {
        let mut y = vec![-2.0, 5.0, 0.5];
        project_monotone_box(&mut y, 0.0, 1.0);
        assert_eq!(y, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn empty_is_fine() {
        let mut y: Vec<f64> = vec![];
        project_monotone(&mut y);
    }
}
