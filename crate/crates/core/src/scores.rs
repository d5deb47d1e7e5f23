//! Rank normal scores: `Φ⁻¹((rank − 3/8) / (n + 1/4))` with midranks for ties.

use crate::error::{DepError, Result};

/// Inverse standard normal CDF (Wichura's AS 241, PPND16).
///
/// Relative accuracy is about 1e-16 over the open unit interval. Returns
/// ±∞ at 0 and 1 and NaN outside [0, 1].
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_812_8e4) * r
            + 6.726_577_092_700_870_1e4)
            * r
            + 4.592_195_393_154_987_1e4)
            * r
            + 1.373_169_376_550_946_1e4)
            * r
            + 1.971_590_950_306_551_4e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_6;
        let den = ((((((5.226_495_278_852_854_6e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271_1e4)
            * r
            + 2.121_379_430_158_659_6e4)
            * r
            + 5.394_196_021_424_751_1e3)
            * r
            + 6.871_870_074_920_579_1e2)
            * r
            + 4.231_333_070_160_091_1e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let z = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_5e-2) * r
            + 2.417_807_251_774_506_1e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_6)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_6;
        let den = ((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_7e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_3e-2)
            * r
            + 2.965_605_718_285_048_9e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_8;
        let den = ((((((2.044_263_103_389_939_8e-15 * r + 1.421_511_758_316_445_9e-7) * r
            + 1.846_318_317_510_054_7e-5)
            * r
            + 7.868_691_311_456_132_6e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_879_4e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}

/// Ranks starting at 1; tied values share their average rank.
pub fn midranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && v[order[end]] == v[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

pub fn rank_normal_scores(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.len();
    if n < 2 {
        return Err(DepError::InsufficientSample { needed: 2, got: n });
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(DepError::invalid(format!("non-finite value at index {i}")));
    }
    let denom = n as f64 + 0.25;
    Ok(midranks(v)
        .into_iter()
        .map(|r| inverse_normal_cdf((r - 0.375) / denom))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn inverse_normal_matches_reference() {
        let normal = Normal::standard();
        let mut p = 1e-7;
        while p < 1.0 - 1e-7 {
            let mine = inverse_normal_cdf(p);
            let reference = normal.inverse_cdf(p);
            assert!((mine - reference).abs() < 1e-9, "p={p}: {mine} vs {reference}");
            p = if p < 0.01 { p * 1.7 } else { p + 0.003_7 };
        }
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
        assert!((inverse_normal_cdf(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        assert!((inverse_normal_cdf(1e-20) + 9.262_340_089_798_408).abs() < 1e-12);
    }

    #[test]
    fn midranks_with_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(midranks(&[7.0; 3]), vec![2.0; 3]);
    }

    #[test]
    fn two_point_scores() {
        let s = rank_normal_scores(&[5.0, 2.0]).unwrap();
        let expected = inverse_normal_cdf(1.625 / 2.25);
        assert!((s[0] - expected).abs() < 1e-15);
        assert!((s[0] - 0.589_455_1).abs() < 1e-6);
        assert_eq!(s[1], -s[0]);
    }

    #[test]
    fn constant_input_gives_equal_scores() {
        let s = rank_normal_scores(&[1.5; 6]).unwrap();
        assert!(s.iter().all(|&v| v == s[0]));
        // midrank (n+1)/2 sits at the centre of the Blom fraction
        assert!(s[0].abs() < 1e-12);
    }

    #[test]
    fn antisymmetric_in_rank() {
        let v = [0.3, -1.2, 8.0, 2.2, 0.0, 5.5, -7.1];
        let s = rank_normal_scores(&v).unwrap();
        let r = midranks(&v);
        for i in 0..v.len() {
            for j in 0..v.len() {
                if r[i] + r[j] == v.len() as f64 + 1.0 {
                    assert!((s[i] + s[j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(rank_normal_scores(&[1.0]).is_err());
        assert!(rank_normal_scores(&[1.0, f64::NAN]).is_err());
    }
}
