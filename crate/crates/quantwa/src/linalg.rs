//! Exact linear solves by fraction-free (Bareiss) elimination.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// Solves `A x = b` exactly.
pub fn solve(a: Vec<Vec<Rational>>, b: Vec<Rational>) -> Result<Vec<Rational>> {
    let cols = b.into_iter().map(|v| vec![v]).collect();
    Ok(solve_multi(a, cols)?.into_iter().map(|mut r| r.remove(0)).collect())
}

/// Solves `A X = B` for a square `A` and any number of right-hand sides,
/// given row-wise as `b[i][c]`. Returns `x[i][c]`.
pub fn solve_multi(a: Vec<Vec<Rational>>, b: Vec<Vec<Rational>>) -> Result<Vec<Vec<Rational>>> {
    let n = a.len();
    if b.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::Internal("linear system has inconsistent dimensions".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = b[0].len();
    let width = n + m;

    // Clear denominators row by row.
    let mut rows: Vec<Vec<BigInt>> = a
        .into_iter()
        .zip(b)
        .map(|(ra, rb)| {
            let row: Vec<Rational> = ra.into_iter().chain(rb).collect();
            let l = row.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            row.into_iter().map(|x| x.numer() * (&l / x.denom())).collect()
        })
        .collect();

    let mut prev = BigInt::one();
    for k in 0..n {
        let pivot =
            (k..n).find(|&r| !rows[r][k].is_zero()).ok_or_else(|| Error::Internal("singular linear system".into()))?;
        rows.swap(k, pivot);
        let (top, bottom) = rows.split_at_mut(k + 1);
        let pr = &top[k];
        for row in bottom.iter_mut() {
            let factor = row[k].clone();
            for j in k + 1..width {
                let v = &pr[k] * &row[j] - &factor * &pr[j];
                row[j] = v / &prev;
            }
            row[k] = BigInt::zero();
        }
        prev = rows[k][k].clone();
    }

    let mut x = vec![vec![Rational::zero(); m]; n];
    for i in (0..n).rev() {
        for c in 0..m {
            let mut acc = Rational::from_integer(rows[i][n + c].clone());
            for j in i + 1..n {
                if !rows[i][j].is_zero() {
                    acc -= Rational::from_integer(rows[i][j].clone()) * &x[j][c];
                }
            }
            x[i][c] = acc / Rational::from_integer(rows[i][i].clone());
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn solves_small_system_exactly() {
        // x + y/2 = 1, x/3 - y = 0
        let a = vec![vec![int(1), ratio(1, 2)], vec![ratio(1, 3), int(-1)]];
        let x = solve(a, vec![int(1), int(0)]).unwrap();
        assert_eq!(x, vec![ratio(6, 7), ratio(2, 7)]);
    }

    #[test]
    fn needs_pivoting() {
        let a = vec![vec![int(0), int(1)], vec![int(1), int(0)]];
        let x = solve(a, vec![int(3), int(4)]).unwrap();
        assert_eq!(x, vec![int(4), int(3)]);
    }

    #[test]
    fn singular_system_is_an_error() {
        let a = vec![vec![int(1), int(2)], vec![int(2), int(4)]];
        assert!(solve(a, vec![int(1), int(2)]).is_err());
    }

    #[test]
    fn multiple_right_hand_sides() {
        let a = vec![vec![int(2), int(0)], vec![int(0), ratio(1, 2)]];
        let b = vec![vec![int(1), int(2)], vec![int(1), int(3)]];
        let x = solve_multi(a, b).unwrap();
        assert_eq!(x, vec![vec![ratio(1, 2), int(1)], vec![int(2), int(6)]]);
    }
}
